#include "grouprec/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "grouprec/error.hpp"
#include "grouprec/rng.hpp"

namespace grouprec {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(std::string_view s) {
  const auto v = parse_double(s);
  if (!v || std::floor(*v) != *v) return std::nullopt;
  return static_cast<long long>(*v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_rating(double v) {
  // Shortest round-trip representation, so load(write(ds)) == ds.
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string level_token(int level) { return std::to_string(level); }

const std::vector<std::string> kDefaultContextNames{"Class", "Semester", "Lockdown"};
const std::vector<std::string> kDefaultCriterionNames{"App", "Data", "Ease"};

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

std::size_t Dataset::distinct_groups() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.group_id);
  return s.size();
}

std::size_t Dataset::distinct_items() const {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.item_id);
  return s.size();
}

Dataset Dataset::empty_like() const {
  Dataset out;
  out.scale = scale;
  out.context_names = context_names;
  out.criterion_names = criterion_names;
  return out;
}

// ---------------------------------------------------------------------------
// Schema declaration

SchemaDecl SchemaDecl::canonical(const Dataset& ds) {
  SchemaDecl d;
  for (const auto& c : ds.context_names) d.contexts.push_back({c, c});
  for (const auto& c : ds.criterion_names) d.criteria.push_back({c, c});
  d.scale = ds.scale;
  const bool members = std::any_of(ds.records.begin(), ds.records.end(),
                                   [](const auto& r) { return !r.members.empty() || r.group_size; });
  if (members) {
    d.members_column = "members";
    d.group_size_column = "group_size";
  }
  return d;
}

SchemaDecl SchemaDecl::itm_rec_group() {
  SchemaDecl d;
  d.group_column = "TeamID";
  d.item_column = "Item";
  d.overall_column = "Rating";
  for (const auto& c : kDefaultContextNames) d.contexts.push_back({c, c});
  for (const auto& c : kDefaultCriterionNames) d.criteria.push_back({c, c});
  return d;
}

SchemaDecl parse_schema_decl(std::string_view text) {
  SchemaDecl d;
  d.contexts.clear();
  d.criteria.clear();
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    auto l = trim(line);
    if (l.empty() || l.front() == '#') continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("schema declaration line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key(trim(l.substr(0, eq)));
    const std::string value(trim(l.substr(eq + 1)));
    auto role = [&] {
      const auto colon = value.find(':');
      if (colon == std::string::npos) return ColumnRole{value, value};
      return ColumnRole{std::string(trim(std::string_view(value).substr(0, colon))),
                        std::string(trim(std::string_view(value).substr(colon + 1)))};
    };
    if (key == "group") {
      d.group_column = value;
    } else if (key == "item") {
      d.item_column = value;
    } else if (key == "overall") {
      d.overall_column = value;
    } else if (key == "context") {
      d.contexts.push_back(role());
    } else if (key == "criterion") {
      d.criteria.push_back(role());
    } else if (key == "members") {
      d.members_column = value;
    } else if (key == "group_size") {
      d.group_size_column = value;
    } else if (key == "scale") {
      const auto comma = value.find(',');
      const auto lo = comma == std::string::npos ? std::nullopt : parse_double(value.substr(0, comma));
      const auto hi = comma == std::string::npos ? std::nullopt : parse_double(value.substr(comma + 1));
      if (!lo || !hi || !(*lo < *hi)) {
        throw ConfigError("schema declaration line " + std::to_string(line_no) +
                          ": scale must be 'lo,hi' with lo < hi");
      }
      d.scale = {*lo, *hi};
    } else {
      throw ConfigError("schema declaration line " + std::to_string(line_no) + ": unknown key '" +
                        key + "'");
    }
  }
  if (d.group_column.empty() || d.item_column.empty() || d.overall_column.empty()) {
    throw ConfigError("schema declaration must name group, item and overall columns");
  }
  return d;
}

SchemaDecl load_schema_decl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema declaration: " + path.string());
  return parse_schema_decl(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string format_schema_decl(const SchemaDecl& d) {
  std::ostringstream os;
  os << "group=" << d.group_column << "\nitem=" << d.item_column << "\noverall=" << d.overall_column
     << "\n";
  for (const auto& c : d.contexts)
    os << "context=" << c.name << (c.name == c.column ? "" : ":" + c.column) << "\n";
  for (const auto& c : d.criteria)
    os << "criterion=" << c.name << (c.name == c.column ? "" : ":" + c.column) << "\n";
  os << "scale=" << format_rating(d.scale.lo) << "," << format_rating(d.scale.hi) << "\n";
  if (!d.members_column.empty()) os << "members=" << d.members_column << "\n";
  if (!d.group_size_column.empty()) os << "group_size=" << d.group_size_column << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> parse_csv(std::string_view text,
                                                std::vector<std::size_t>* line_numbers) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  std::size_t line = 1;
  std::size_t row_start = 1;

  auto end_field = [&] {
    row.push_back(field_quoted ? field : std::string(trim(field)));
    field.clear();
    field_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row.front().empty();
    if (!blank) {
      rows.push_back(std::move(row));
      if (line_numbers) line_numbers->push_back(row_start);
    }
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && trim(field).empty()) {
      field.clear();
      in_quotes = true;
      field_quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
      ++line;
      row_start = line;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field starting on line " + std::to_string(row_start));
  if (!field.empty() || !row.empty() || field_quoted) end_row();
  return rows;
}

Dataset parse_ratings_csv(std::string_view text, const SchemaDecl& decl, std::string_view source) {
  std::vector<std::size_t> lines;
  const auto rows = parse_csv(text, &lines);
  const std::string src(source);
  if (rows.empty()) throw DataError("dataset error: " + src + " is empty");

  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError(src + " row 1: missing column '" + name + "'");
  };

  const std::size_t group_col = column(decl.group_column);
  const std::size_t item_col = column(decl.item_column);
  const std::size_t overall_col = column(decl.overall_column);
  std::vector<std::size_t> context_cols;
  std::vector<std::size_t> criterion_cols;
  for (const auto& c : decl.contexts) context_cols.push_back(column(c.column));
  for (const auto& c : decl.criteria) criterion_cols.push_back(column(c.column));
  const auto members_col =
      decl.members_column.empty() ? std::nullopt : std::optional(column(decl.members_column));
  const auto size_col =
      decl.group_size_column.empty() ? std::nullopt : std::optional(column(decl.group_size_column));

  Dataset ds;
  ds.scale = decl.scale;
  for (const auto& c : decl.contexts) ds.context_names.push_back(c.name);
  for (const auto& c : decl.criteria) ds.criterion_names.push_back(c.name);

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = src + " row " + std::to_string(r) + " (line " + std::to_string(lines[r]) + ")";
    if (row.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(row.size()));
    }
    RatingRecord rec;
    rec.group_id = row[group_col];
    rec.item_id = row[item_col];
    if (rec.group_id.empty() || rec.item_id.empty()) throw ParseError(where + ": empty group or item id");

    const auto overall = parse_double(row[overall_col]);
    if (!overall) throw ParseError(where + ": non-numeric overall rating '" + row[overall_col] + "'");
    if (!decl.scale.contains(*overall)) {
      throw ParseError(where + ": overall rating " + row[overall_col] + " outside scale [" +
                       format_rating(decl.scale.lo) + "," + format_rating(decl.scale.hi) + "]");
    }
    rec.overall = *overall;

    for (std::size_t c = 0; c < decl.contexts.size(); ++c) {
      rec.contexts[decl.contexts[c].name] = row[context_cols[c]];
    }
    for (std::size_t c = 0; c < decl.criteria.size(); ++c) {
      const auto& text_value = row[criterion_cols[c]];
      const auto v = parse_integer(text_value);
      if (!v) {
        throw ParseError(where + ": criterion " + decl.criteria[c].name +
                         " is not an integer rating: '" + text_value + "'");
      }
      if (!decl.scale.contains(static_cast<double>(*v))) {
        throw ParseError(where + ": criterion " + decl.criteria[c].name + " rating " + text_value +
                         " outside scale");
      }
      rec.criteria[decl.criteria[c].name] = static_cast<int>(*v);
    }
    if (members_col && !row[*members_col].empty()) {
      std::istringstream ms(row[*members_col]);
      std::string m;
      while (std::getline(ms, m, ';'))
        if (!trim(m).empty()) rec.members.emplace_back(trim(m));
    }
    if (size_col && !row[*size_col].empty()) {
      const auto v = parse_integer(row[*size_col]);
      if (!v || *v < 1) throw ParseError(where + ": invalid group size '" + row[*size_col] + "'");
      rec.group_size = static_cast<std::size_t>(*v);
    } else if (!rec.members.empty()) {
      rec.group_size = rec.members.size();
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.empty()) throw DataError("dataset error: " + src + " has a header but no records");
  return ds;
}

Dataset load_ratings_csv(const std::filesystem::path& path, const SchemaDecl& decl) {
  if (!std::filesystem::exists(path)) throw DataError("data file not found: " + path.string());
  return parse_ratings_csv(read_file(path), decl, path.string());
}

void write_ratings_csv(const Dataset& ds, std::ostream& out) {
  const auto decl = SchemaDecl::canonical(ds);
  const bool extras = !decl.members_column.empty();
  out << decl.group_column << "," << decl.item_column;
  for (const auto& c : ds.context_names) out << "," << quote_csv(c);
  for (const auto& c : ds.criterion_names) out << "," << quote_csv(c);
  out << "," << decl.overall_column;
  if (extras) out << ",members,group_size";
  out << "\n";
  for (const auto& r : ds.records) {
    out << quote_csv(r.group_id) << "," << quote_csv(r.item_id);
    for (const auto& c : ds.context_names) out << "," << quote_csv(r.contexts.at(c));
    for (const auto& c : ds.criterion_names) out << "," << r.criteria.at(c);
    out << "," << format_rating(r.overall);
    if (extras) {
      std::string joined;
      for (std::size_t i = 0; i < r.members.size(); ++i) joined += (i ? ";" : "") + r.members[i];
      out << "," << quote_csv(joined) << ",";
      // Group size is derived from members on load when both agree.
      if (r.group_size && (r.members.empty() || *r.group_size != r.members.size())) out << *r.group_size;
    }
    out << "\n";
  }
}

void save_ratings_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_ratings_csv(ds, out);
}

// ---------------------------------------------------------------------------
// Vocabularies

std::size_t Vocabulary::add(const std::string& token) {
  const auto [it, inserted] = index_.try_emplace(token, tokens_.size());
  if (inserted) tokens_.push_back(token);
  return it->second;
}

std::size_t Vocabulary::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

FieldSchema Vocabularies::full_schema(CriteriaEncoding encoding) const {
  FieldSchema s;
  s.fields.push_back({"group", FieldKind::group, groups.table_rows()});
  s.fields.push_back({"item", FieldKind::item, items.table_rows()});
  for (const auto& c : context_names)
    s.fields.push_back({c, FieldKind::context, contexts.at(c).table_rows()});
  for (const auto& c : criterion_names) {
    const std::size_t rows = encoding == CriteriaEncoding::ordinal ? 1 : criteria.at(c).table_rows();
    s.fields.push_back({c, FieldKind::criterion, rows});
  }
  return s;
}

Vocabularies build_vocabs(const Dataset& train) {
  if (train.empty()) throw ArgumentError("build_vocabs requires training records");
  Vocabularies v;
  v.scale = train.scale;
  v.context_names = train.context_names;
  v.criterion_names = train.criterion_names;
  for (const auto& c : train.context_names) v.contexts[c];
  for (const auto& c : train.criterion_names) {
    auto& vocab = v.criteria[c];
    for (int level = static_cast<int>(std::ceil(train.scale.lo)); level <= train.scale.hi; ++level)
      vocab.add(level_token(level));
  }
  for (const auto& r : train.records) {
    v.groups.add(r.group_id);
    v.items.add(r.item_id);
    for (const auto& c : train.context_names) v.contexts[c].add(r.contexts.at(c));
  }
  return v;
}

std::size_t group_size_bucket(std::optional<std::size_t> size) {
  if (!size || *size < 2) return 0;
  return std::min<std::size_t>(*size, 5) - 1;
}

EncodedExample encode_record(const RatingRecord& record, const Vocabularies& vocabs,
                             const FieldSchema& schema, CriteriaEncoding encoding) {
  EncodedExample ex;
  ex.target = record.overall;
  ex.indices.reserve(schema.size());
  ex.values.reserve(schema.size());
  for (const auto& f : schema.fields) {
    std::size_t index = 0;
    double value = 1.0;
    switch (f.kind) {
      case FieldKind::group: index = vocabs.groups.index_of(record.group_id); break;
      case FieldKind::item: index = vocabs.items.index_of(record.item_id); break;
      case FieldKind::context: {
        if (f.name == kGroupSizeField) {
          index = group_size_bucket(record.group_size);
          break;
        }
        const auto vocab = vocabs.contexts.find(f.name);
        const auto value_it = record.contexts.find(f.name);
        if (vocab == vocabs.contexts.end() || value_it == record.contexts.end()) {
          throw EncodeError("record " + record.group_id + "/" + record.item_id +
                            " lacks context field '" + f.name + "'");
        }
        index = vocab->second.index_of(value_it->second);
        break;
      }
      case FieldKind::criterion: {
        const auto vocab = vocabs.criteria.find(f.name);
        const auto value_it = record.criteria.find(f.name);
        if (vocab == vocabs.criteria.end() || value_it == record.criteria.end()) {
          throw EncodeError("record " + record.group_id + "/" + record.item_id +
                            " lacks criterion field '" + f.name + "'");
        }
        if (encoding == CriteriaEncoding::ordinal) {
          value = (value_it->second - vocabs.scale.lo) / (vocabs.scale.hi - vocabs.scale.lo);
        } else {
          index = vocab->second.index_of(level_token(value_it->second));
        }
        break;
      }
    }
    if (index >= f.vocab_size) {
      throw EncodeError("encoded index " + std::to_string(index) + " exceeds vocabulary of field '" +
                        f.name + "'");
    }
    ex.indices.push_back(index);
    ex.values.push_back(value);
  }
  return ex;
}

std::vector<EncodedExample> encode_dataset(const Dataset& ds, const Vocabularies& vocabs,
                                           const FieldSchema& schema, CriteriaEncoding encoding) {
  std::vector<EncodedExample> out;
  out.reserve(ds.size());
  for (const auto& r : ds.records) out.push_back(encode_record(r, vocabs, schema, encoding));
  return out;
}

// ---------------------------------------------------------------------------
// Splitting and imputation

DataSplit split(const Dataset& ds, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0 && fractions.val > 0 && fractions.test > 0) ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  // The epsilon keeps e.g. 0.29*100 from flooring to 28.
  const auto n_train = static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw SplitError("split of " + std::to_string(n) + " records leaves an empty part");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(seed);
  rng.shuffle(order);

  DataSplit out{ds.empty_like(), ds.empty_like(), ds.empty_like(), 0xcbf29ce484222325ULL};
  for (std::size_t i = 0; i < n; ++i) {
    auto& part = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    part.records.push_back(ds.records[order[i]]);
    for (int byte = 0; byte < 8; ++byte) {
      out.fingerprint ^= (order[i] >> (8 * byte)) & 0xff;
      out.fingerprint *= 0x100000001b3ULL;
    }
  }
  return out;
}

std::map<std::string, int> impute_criteria(const Dataset& train, const std::string& item_id) {
  if (train.empty()) throw ArgumentError("impute_criteria requires training records");
  std::map<std::string, double> item_sum;
  std::map<std::string, double> global_sum;
  std::size_t item_n = 0;
  for (const auto& r : train.records) {
    const bool match = r.item_id == item_id;
    item_n += match;
    for (const auto& [name, v] : r.criteria) {
      global_sum[name] += v;
      if (match) item_sum[name] += v;
    }
  }
  std::map<std::string, int> out;
  for (const auto& name : train.criterion_names) {
    const double mean = item_n > 0 ? item_sum[name] / static_cast<double>(item_n)
                                   : global_sum[name] / static_cast<double>(train.size());
    out[name] = static_cast<int>(std::floor(mean + 0.5));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

std::string_view to_string(SyntheticRule rule) {
  return rule == SyntheticRule::criteria_mean ? "criteria_mean" : "context_shift";
}

SyntheticRule parse_synthetic_rule(std::string_view text) {
  if (text == "criteria_mean") return SyntheticRule::criteria_mean;
  if (text == "context_shift") return SyntheticRule::context_shift;
  throw ConfigError("unknown synthetic rule '" + std::string(text) + "'");
}

void SyntheticConfig::validate() const {
  if (n_groups == 0 || n_items == 0 || n_records == 0 || criteria_count == 0) {
    throw ConfigError("synthetic counts must be positive");
  }
  for (auto c : context_cardinalities)
    if (c == 0) throw ConfigError("synthetic context cardinalities must be positive");
  if (!(noise_std >= 0.0)) throw ConfigError("synthetic noise_std must be >= 0");
  if (rule == SyntheticRule::context_shift && context_cardinalities.empty()) {
    throw ConfigError("context_shift rule needs at least one context");
  }
}

double synthetic_signal(std::span<const int> criteria, SyntheticRule rule,
                        std::size_t first_context_value) {
  double mean = 0.0;
  for (int c : criteria) mean += c;
  mean /= static_cast<double>(criteria.size());
  if (rule == SyntheticRule::context_shift) {
    if (first_context_value == 0) mean += 1.0;
    if (first_context_value == 1) mean -= 1.0;
  }
  return mean;
}

double synthetic_overall(double signal, double noise, const RatingScale& scale) {
  return scale.clamp(std::floor(signal + noise + 0.5));
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.scale = {1.0, 5.0};
  for (std::size_t c = 0; c < cfg.context_cardinalities.size(); ++c) {
    ds.context_names.push_back(c < kDefaultContextNames.size() ? kDefaultContextNames[c]
                                                               : "Context" + std::to_string(c + 1));
  }
  for (std::size_t c = 0; c < cfg.criteria_count; ++c) {
    ds.criterion_names.push_back(c < kDefaultCriterionNames.size()
                                     ? kDefaultCriterionNames[c]
                                     : "Criterion" + std::to_string(c + 1));
  }

  SeededRng rng(cfg.seed);
  std::vector<std::vector<std::string>> members(cfg.n_groups);
  std::size_t next_user = 1;
  for (auto& m : members) {
    const auto size = 2 + rng.below(4);
    for (std::uint64_t k = 0; k < size; ++k) m.push_back("u" + std::to_string(next_user++));
  }

  std::vector<int> crit(cfg.criteria_count);
  for (std::size_t n = 0; n < cfg.n_records; ++n) {
    RatingRecord r;
    const auto g = rng.below(cfg.n_groups);
    r.group_id = "g" + std::to_string(g + 1);
    r.item_id = "i" + std::to_string(rng.below(cfg.n_items) + 1);
    std::size_t first_context = 0;
    for (std::size_t c = 0; c < cfg.context_cardinalities.size(); ++c) {
      const auto v = rng.below(cfg.context_cardinalities[c]);
      if (c == 0) first_context = v;
      r.contexts[ds.context_names[c]] = "v" + std::to_string(v);
    }
    for (std::size_t c = 0; c < cfg.criteria_count; ++c) {
      crit[c] = 1 + static_cast<int>(rng.below(5));
      r.criteria[ds.criterion_names[c]] = crit[c];
    }
    const double noise = cfg.noise_std * rng.normal();
    r.overall = synthetic_overall(synthetic_signal(crit, cfg.rule, first_context), noise, ds.scale);
    r.members = members[g];
    r.group_size = members[g].size();
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace grouprec
