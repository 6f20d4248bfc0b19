#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grouprec/model.hpp"
#include "grouprec/scale.hpp"

namespace grouprec {

/// One group-item interaction.
struct RatingRecord {
  std::string group_id;
  std::string item_id;
  std::map<std::string, std::string> contexts;
  std::map<std::string, int> criteria;
  double overall = 0.0;
  std::vector<std::string> members;
  std::optional<std::size_t> group_size;

  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct Dataset {
  std::vector<RatingRecord> records;
  RatingScale scale;
  std::vector<std::string> context_names;    // header order
  std::vector<std::string> criterion_names;  // header order

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::size_t distinct_groups() const;
  std::size_t distinct_items() const;
  /// Same header and scale, no records.
  Dataset empty_like() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Column declaration

struct ColumnRole {
  std::string name;    // field name used by the model and scenarios
  std::string column;  // CSV header text

  friend bool operator==(const ColumnRole&, const ColumnRole&) = default;
};

/// Maps CSV columns to roles. Text form, one key=value per line, '#'
/// comments:
///
///   group=TeamID
///   item=Item
///   overall=Rating
///   context=Class            (or context=Name:Column)
///   criterion=App
///   scale=1,5
///   members=Members          (optional, ';'-separated user ids)
///   group_size=Size          (optional)
struct SchemaDecl {
  std::string group_column = "group_id";
  std::string item_column = "item_id";
  std::string overall_column = "overall";
  std::vector<ColumnRole> contexts;
  std::vector<ColumnRole> criteria;
  RatingScale scale;
  std::string members_column;
  std::string group_size_column;

  /// Column layout written by write_ratings_csv for `ds`.
  static SchemaDecl canonical(const Dataset& ds);
  /// Mapping for the ITM-Rec group ratings file.
  static SchemaDecl itm_rec_group();

  friend bool operator==(const SchemaDecl&, const SchemaDecl&) = default;
};

SchemaDecl parse_schema_decl(std::string_view text);
SchemaDecl load_schema_decl(const std::filesystem::path& path);
std::string format_schema_decl(const SchemaDecl& decl);

// ---------------------------------------------------------------------------
// CSV

/// Splits CSV text into records of fields. Handles quoted fields with
/// embedded commas, doubled quotes and newlines, CRLF line ends and a
/// leading UTF-8 BOM. `line_numbers` receives the starting line of each
/// record.
std::vector<std::vector<std::string>> parse_csv(std::string_view text,
                                                std::vector<std::size_t>* line_numbers = nullptr);

/// Throws ParseError (row-numbered) for missing columns, non-numeric or
/// out-of-scale ratings, DataError for an empty file.
Dataset parse_ratings_csv(std::string_view text, const SchemaDecl& decl,
                          std::string_view source = "<memory>");
Dataset load_ratings_csv(const std::filesystem::path& path, const SchemaDecl& decl);

/// Canonical layout: group_id,item_id,<contexts>,<criteria>,overall and,
/// when any record carries them, members,group_size.
void write_ratings_csv(const Dataset& ds, std::ostream& out);
void save_ratings_csv(const Dataset& ds, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Vocabularies

/// Token <-> index bijection with UNK reserved at index 0. Known tokens get
/// indices 1.. in first-occurrence order.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::string_view kUnkToken = "<UNK>";

  Vocabulary() = default;

  std::size_t add(const std::string& token);
  /// kUnk for unseen tokens.
  std::size_t index_of(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.contains(token); }
  const std::string& token(std::size_t index) const { return tokens_.at(index); }

  /// Number of known tokens (UNK excluded).
  std::size_t size() const noexcept { return tokens_.size() - 1; }
  /// Embedding rows needed: known tokens plus UNK.
  std::size_t table_rows() const noexcept { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_{std::string(kUnkToken)};
  std::unordered_map<std::string, std::size_t> index_;
};

struct Vocabularies {
  Vocabulary groups;
  Vocabulary items;
  std::vector<std::string> context_names;
  std::vector<std::string> criterion_names;
  std::map<std::string, Vocabulary> contexts;
  std::map<std::string, Vocabulary> criteria;  // fixed levels lo..hi
  RatingScale scale;

  /// group, item, contexts, criteria in header order; vocab sizes are
  /// table rows (1 per criterion under ordinal encoding).
  FieldSchema full_schema(CriteriaEncoding encoding = CriteriaEncoding::categorical) const;
};

/// Vocabularies from training rows only.
Vocabularies build_vocabs(const Dataset& train);

/// 0 for sizes below 2 or unknown, then buckets 2, 3, 4, 5+.
std::size_t group_size_bucket(std::optional<std::size_t> size);

/// Maps the record onto the schema's fields. Unknown tokens become UNK.
/// Throws EncodeError if the record lacks a field the schema needs.
EncodedExample encode_record(const RatingRecord& record, const Vocabularies& vocabs,
                             const FieldSchema& schema,
                             CriteriaEncoding encoding = CriteriaEncoding::categorical);

std::vector<EncodedExample> encode_dataset(const Dataset& ds, const Vocabularies& vocabs,
                                           const FieldSchema& schema,
                                           CriteriaEncoding encoding = CriteriaEncoding::categorical);

// ---------------------------------------------------------------------------
// Splitting and imputation

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DataSplit {
  Dataset train;
  Dataset val;
  Dataset test;
  /// FNV-1a over the shuffled row order; equal fingerprints mean equal splits.
  std::uint64_t fingerprint = 0;
};

/// Seeded shuffle then contiguous slicing: floor(train*n), floor(val*n),
/// remainder. Throws SplitError if any part would be empty.
DataSplit split(const Dataset& ds, SplitFractions fractions, std::uint64_t seed);

/// Per criterion, the mean rating of `item_id` in `train` rounded half up;
/// the global criterion mean when the item is absent.
std::map<std::string, int> impute_criteria(const Dataset& train, const std::string& item_id);

// ---------------------------------------------------------------------------
// Synthetic data

enum class SyntheticRule { criteria_mean, context_shift };

std::string_view to_string(SyntheticRule rule);
SyntheticRule parse_synthetic_rule(std::string_view text);

struct SyntheticConfig {
  std::size_t n_groups = 40;
  std::size_t n_items = 30;
  std::size_t n_records = 1000;
  std::vector<std::size_t> context_cardinalities{3, 2, 2};
  std::size_t criteria_count = 3;
  double noise_std = 0.25;
  std::uint64_t seed = 0;
  SyntheticRule rule = SyntheticRule::criteria_mean;

  void validate() const;
};

/// The generating rule before noise: mean of the criteria, shifted by +1
/// (first context value), -1 (second value) or 0 under context_shift.
double synthetic_signal(std::span<const int> criteria, SyntheticRule rule,
                        std::size_t first_context_value);
/// clamp(round_half_up(signal + noise), scale).
double synthetic_overall(double signal, double noise, const RatingScale& scale);

Dataset generate_synthetic(const SyntheticConfig& cfg);

}  // namespace grouprec
