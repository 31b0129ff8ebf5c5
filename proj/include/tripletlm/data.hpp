#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tripletlm/rng.hpp"

namespace tripletlm {

/// A catalog entry: title (first textual element) and description (second).
struct Item {
  std::string item_id;
  std::string title;
  std::string description;
  bool operator==(const Item&) const = default;
};

using Catalog = std::vector<Item>;

struct AnnotationEntry {
  std::string source_id;
  std::vector<std::string> similar_ids;  // expert order preserved
  bool operator==(const AnnotationEntry&) const = default;
};

struct AnnotationSet {
  std::vector<AnnotationEntry> entries;
  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
  bool operator==(const AnnotationSet&) const = default;
};

inline constexpr std::string_view kCatalogSchema = "tripletlm.catalog";
inline constexpr std::string_view kAnnotationSchema = "tripletlm.annotations";
inline constexpr int kDataFormatVersion = 1;

// Line-delimited JSON. The first non-empty line is the schema header; a file
// with no content at all is an empty collection.
Catalog parse_catalog(std::istream& in, const std::string& source = "<stream>");
Catalog load_catalog(const std::filesystem::path& path);
void write_catalog(std::ostream& out, const Catalog& catalog);

/// `known_ids` is the catalog the annotations must refer to.
AnnotationSet parse_annotations(std::istream& in, const Catalog& catalog,
                                const std::string& source = "<stream>");
AnnotationSet load_annotations(const std::filesystem::path& path,
                               const Catalog& catalog);
void write_annotations(std::ostream& out, const AnnotationSet& annotations);

/// NFKC-folds, lowercases and splits on runs of non-alphanumeric code points.
std::vector<std::string> normalize_and_split(std::string_view text);

/// Frequency-ranked word vocabulary with the reserved ids 0..2 in front.
class Vocabulary {
 public:
  static constexpr std::string_view kPadToken = "[pad]";
  static constexpr std::string_view kMaskToken = "[mask]";
  static constexpr std::string_view kUnknownToken = "[unk]";

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> tokens);

  /// Counts words over `texts`; keeps the most frequent ones (ties broken
  /// lexicographically) until the vocabulary holds `max_size` entries.
  static Vocabulary build(const std::vector<std::string>& texts, int max_size);
  static Vocabulary build(const Catalog& catalog, int max_size);

  std::vector<int> tokenize(std::string_view text) const;
  int id(const std::string& word) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct SyntheticSpec {
  int n_clusters = 4;
  int items_per_cluster = 50;
  int words_per_cluster = 40;  // size of each cluster's exclusive pool
  int shared_words = 40;       // size of the pool common to all clusters
  double shared_fraction = 0.3;
  int name_words = 2;  // item-specific words repeated in title and description
  int title_words = 4;
  int description_words = 16;
  std::uint64_t seed = 1234;

  void validate() const;
};

struct SyntheticCorpus {
  Catalog catalog;
  AnnotationSet annotations;
  std::vector<int> cluster_of;  // parallel to catalog
  std::vector<std::vector<std::string>> cluster_pools;
  std::vector<std::string> shared_pool;
};

/// Items whose texts draw from their cluster's pool plus a shared pool;
/// every item is annotated with all of its cluster-mates.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace tripletlm
