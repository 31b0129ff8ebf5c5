#include "tripletlm/data.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <unordered_set>

#include "tripletlm/encoder.hpp"
#include "tripletlm/errors.hpp"

namespace tripletlm {
namespace {

using nlohmann::json;

std::string location(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  });
}

json parse_line(const std::string& line, const std::string& source,
                std::size_t line_no) {
  json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (record.is_discarded() || !record.is_object()) {
    throw IngestionError(location(source, line_no) +
                         ": malformed record (expected a JSON object)");
  }
  return record;
}

std::string string_field(const json& record, const char* key,
                         const std::string& source, std::size_t line_no) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw IngestionError(location(source, line_no) + ": field '" + key +
                         "' missing or not a string");
  }
  return it->get<std::string>();
}

void check_fields(const json& record, std::initializer_list<const char*> keys,
                  const std::string& source, std::size_t line_no) {
  for (const auto& [key, value] : record.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) {
          return key == k;
        }) == keys.end()) {
      throw IngestionError(location(source, line_no) + ": unknown field '" +
                           key + "'");
    }
  }
}

// Reads the schema header. Returns false when the stream holds no content.
bool read_header(std::istream& in, std::string_view schema,
                 const std::string& source, std::size_t& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json header = parse_line(line, source, line_no);
    const auto s = header.find("schema");
    const auto v = header.find("version");
    if (s == header.end() || !s->is_string() || *s != schema) {
      throw IngestionError(location(source, line_no) +
                           ": expected schema header '" + std::string(schema) +
                           "'");
    }
    if (v == header.end() || !v->is_number_integer() ||
        v->get<int>() != kDataFormatVersion) {
      throw IngestionError(location(source, line_no) +
                           ": unsupported schema version");
    }
    return true;
  }
  return false;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  return in;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

}  // namespace

std::vector<std::string> normalize_and_split(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error("unicode", "NFKC normalizer unavailable");
  icu::UnicodeString folded = nfkc->normalize(
      icu::UnicodeString::fromUTF8(
          icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))),
      status);
  if (U_FAILURE(status)) throw Error("unicode", "normalization failed");
  folded.toLower(icu::Locale::getRoot());

  std::vector<std::string> words;
  icu::UnicodeString current;
  for (int32_t i = 0; i < folded.length();) {
    const UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (u_isalnum(c)) {
      current.append(c);
    } else if (!current.isEmpty()) {
      words.push_back(to_utf8(current));
      current.remove();
    }
  }
  if (!current.isEmpty()) words.push_back(to_utf8(current));
  return words;
}

Catalog parse_catalog(std::istream& in, const std::string& source) {
  Catalog catalog;
  std::size_t line_no = 0;
  if (!read_header(in, kCatalogSchema, source, line_no)) return catalog;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json record = parse_line(line, source, line_no);
    check_fields(record, {"item_id", "title", "description"}, source, line_no);
    Item item{string_field(record, "item_id", source, line_no),
              string_field(record, "title", source, line_no),
              string_field(record, "description", source, line_no)};
    if (item.item_id.empty()) {
      throw IngestionError(location(source, line_no) + ": empty item_id");
    }
    if (normalize_and_split(item.title).empty()) {
      throw IngestionError(location(source, line_no) + ": item '" +
                           item.item_id + "' has an empty title");
    }
    if (normalize_and_split(item.description).empty()) {
      throw IngestionError(location(source, line_no) + ": item '" +
                           item.item_id + "' has an empty description");
    }
    const auto [it, inserted] = seen.emplace(item.item_id, line_no);
    if (!inserted) {
      throw IngestionError(location(source, line_no) + ": duplicate item_id '" +
                           item.item_id + "' (first seen on line " +
                           std::to_string(it->second) + ")");
    }
    catalog.push_back(std::move(item));
  }
  return catalog;
}

Catalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return parse_catalog(in, path.string());
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << json{{"schema", kCatalogSchema}, {"version", kDataFormatVersion}}.dump()
      << '\n';
  for (const Item& item : catalog) {
    json record = json::object();
    record["item_id"] = item.item_id;
    record["title"] = item.title;
    record["description"] = item.description;
    out << record.dump() << '\n';
  }
}

AnnotationSet parse_annotations(std::istream& in, const Catalog& catalog,
                                const std::string& source) {
  AnnotationSet set;
  std::size_t line_no = 0;
  if (!read_header(in, kAnnotationSchema, source, line_no)) return set;
  std::unordered_set<std::string> known;
  for (const Item& item : catalog) known.insert(item.item_id);
  std::unordered_set<std::string> sources;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json record = parse_line(line, source, line_no);
    check_fields(record, {"source_id", "similar_ids"}, source, line_no);
    AnnotationEntry entry;
    entry.source_id = string_field(record, "source_id", source, line_no);
    const auto ids = record.find("similar_ids");
    if (ids == record.end() || !ids->is_array() || ids->empty()) {
      throw IngestionError(location(source, line_no) +
                           ": 'similar_ids' must be a non-empty list");
    }
    for (const json& id : *ids) {
      if (!id.is_string()) {
        throw IngestionError(location(source, line_no) +
                             ": 'similar_ids' entries must be strings");
      }
      entry.similar_ids.push_back(id.get<std::string>());
    }
    if (!known.contains(entry.source_id)) {
      throw IngestionError(location(source, line_no) + ": unknown item id '" +
                           entry.source_id + "'");
    }
    for (const std::string& id : entry.similar_ids) {
      if (!known.contains(id)) {
        throw IngestionError(location(source, line_no) + ": unknown item id '" +
                             id + "'");
      }
    }
    if (!sources.insert(entry.source_id).second) {
      throw IngestionError(location(source, line_no) + ": source '" +
                           entry.source_id + "' appears twice");
    }
    set.entries.push_back(std::move(entry));
  }
  return set;
}

AnnotationSet load_annotations(const std::filesystem::path& path,
                               const Catalog& catalog) {
  std::ifstream in = open_input(path);
  return parse_annotations(in, catalog, path.string());
}

void write_annotations(std::ostream& out, const AnnotationSet& annotations) {
  out << json{{"schema", kAnnotationSchema}, {"version", kDataFormatVersion}}
             .dump()
      << '\n';
  for (const AnnotationEntry& e : annotations.entries) {
    json record = json::object();
    record["source_id"] = e.source_id;
    record["similar_ids"] = e.similar_ids;
    out << record.dump() << '\n';
  }
}

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>{std::string(kPadToken),
                                          std::string(kMaskToken),
                                          std::string(kUnknownToken)}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < static_cast<std::size_t>(kNumSpecialTokens) ||
      tokens_[kPadId] != kPadToken || tokens_[kMaskId] != kMaskToken ||
      tokens_[kUnknownId] != kUnknownToken) {
    throw ContractViolation("vocabulary must start with the reserved tokens");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ContractViolation("duplicate vocabulary entry '" + tokens_[i] +
                              "'");
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts,
                             int max_size) {
  std::map<std::string, std::size_t> counts;
  for (const std::string& text : texts) {
    for (std::string& w : normalize_and_split(text)) ++counts[std::move(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  Vocabulary vocab;
  std::vector<std::string> tokens = vocab.tokens_;
  for (auto& [word, count] : ranked) {
    if (static_cast<int>(tokens.size()) >= max_size) break;
    tokens.push_back(word);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::build(const Catalog& catalog, int max_size) {
  std::vector<std::string> texts;
  texts.reserve(catalog.size() * 2);
  for (const Item& item : catalog) {
    texts.push_back(item.title);
    texts.push_back(item.description);
  }
  return build(texts, max_size);
}

int Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnknownId : it->second;
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& w : normalize_and_split(text)) ids.push_back(id(w));
  return ids;
}

void SyntheticSpec::validate() const {
  if (n_clusters < 2) throw ConfigError("n_clusters must be >= 2");
  if (items_per_cluster < 2) throw ConfigError("items_per_cluster must be >= 2");
  if (words_per_cluster < 1) throw ConfigError("words_per_cluster must be >= 1");
  if (!(shared_fraction >= 0.0 && shared_fraction < 1.0)) {
    throw ConfigError("shared_fraction must lie in [0, 1)");
  }
  if (shared_fraction > 0.0 && shared_words < 1) {
    throw ConfigError("shared_words must be >= 1 when shared_fraction > 0");
  }
  if (name_words < 0 || title_words < 0 || description_words < 1 ||
      name_words + title_words < 1) {
    throw ConfigError("synthetic text lengths must leave both texts non-empty");
  }
}

namespace {

class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    static constexpr std::string_view kOnsets[] = {
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
        "br", "dr", "gr", "kl", "pr", "st", "tr", "sh", "ch"};
    static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u",
                                                   "ai", "ou", "ea"};
    for (;;) {
      const std::size_t syllables = 2 + rng_.uniform_index(2);
      std::string word;
      for (std::size_t s = 0; s < syllables; ++s) {
        word += kOnsets[rng_.uniform_index(std::size(kOnsets))];
        word += kVowels[rng_.uniform_index(std::size(kVowels))];
      }
      if (used_.insert(word).second) return word;
    }
  }

  std::vector<std::string> pool(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(fresh());
    return out;
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

std::string capitalized(std::string word) {
  if (!word.empty()) word[0] = static_cast<char>(word[0] - 'a' + 'A');
  return word;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 7));
  WordFactory words(rng);
  SyntheticCorpus corpus;
  corpus.shared_pool = words.pool(spec.shared_words);
  for (int c = 0; c < spec.n_clusters; ++c) {
    corpus.cluster_pools.push_back(words.pool(spec.words_per_cluster));
  }

  auto draw = [&](int cluster) -> const std::string& {
    if (spec.shared_fraction > 0.0 && rng.bernoulli(spec.shared_fraction)) {
      return corpus.shared_pool[rng.uniform_index(corpus.shared_pool.size())];
    }
    const auto& pool = corpus.cluster_pools[static_cast<std::size_t>(cluster)];
    return pool[rng.uniform_index(pool.size())];
  };

  const int width = 4;
  int next_id = 0;
  for (int c = 0; c < spec.n_clusters; ++c) {
    for (int i = 0; i < spec.items_per_cluster; ++i) {
      std::string id = std::to_string(next_id++);
      id = "item" + std::string(width - std::min<std::size_t>(width, id.size()),
                                '0') +
           id;
      std::vector<std::string> names = words.pool(spec.name_words);
      std::string title;
      for (const auto& n : names) title += capitalized(n) + " ";
      for (int w = 0; w < spec.title_words; ++w) title += draw(c) + " ";
      title.pop_back();
      std::string description;
      for (const auto& n : names) description += capitalized(n) + " ";
      for (int w = 0; w < spec.description_words; ++w) {
        description += draw(c);
        description += (w + 1 == spec.description_words) ? "." : " ";
      }
      corpus.catalog.push_back({std::move(id), std::move(title),
                                std::move(description)});
      corpus.cluster_of.push_back(c);
    }
  }

  for (std::size_t i = 0; i < corpus.catalog.size(); ++i) {
    AnnotationEntry entry{corpus.catalog[i].item_id, {}};
    for (std::size_t j = 0; j < corpus.catalog.size(); ++j) {
      if (j != i && corpus.cluster_of[j] == corpus.cluster_of[i]) {
        entry.similar_ids.push_back(corpus.catalog[j].item_id);
      }
    }
    corpus.annotations.entries.push_back(std::move(entry));
  }
  return corpus;
}

}  // namespace tripletlm
