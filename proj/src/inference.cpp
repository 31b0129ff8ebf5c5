#include "tripletlm/inference.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "tripletlm/encoder.hpp"
#include "tripletlm/errors.hpp"
#include "tripletlm/io.hpp"

namespace tripletlm {
namespace {

using nlohmann::json;

constexpr std::string_view kEmbeddingSchema = "tripletlm.embeddings";

Vector pooled_embedding(const Encoder& encoder, const Vocabulary& vocab,
                        const std::string& text, std::size_t& truncated) {
  std::vector<int> ids = vocab.tokenize(text);
  const auto max_len = static_cast<std::size_t>(encoder.config().max_seq_len);
  if (ids.size() > max_len) {
    ids.resize(max_len);
    ++truncated;
  }
  if (ids.empty()) ids.push_back(kUnknownId);
  return encoder.encode(TokenSequence::unmasked(std::move(ids))).pooled;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

CatalogEmbeddings embed_catalog(const Catalog& items, const Checkpoint& ckpt) {
  const Encoder encoder(ckpt.encoder, ckpt.params);
  CatalogEmbeddings out;
  out.seed = ckpt.seed;
  out.items.reserve(items.size());
  for (const Item& item : items) {
    out.items.push_back(
        {item.item_id,
         pooled_embedding(encoder, ckpt.vocabulary, item.title,
                          out.truncated_texts),
         pooled_embedding(encoder, ckpt.vocabulary, item.description,
                          out.truncated_texts)});
  }
  return out;
}

double score(const ItemEmbedding& source, const ItemEmbedding& candidate) {
  if (source.title_vec.size() != candidate.title_vec.size() ||
      source.desc_vec.size() != candidate.desc_vec.size()) {
    throw ContractViolation("embedding dimension mismatch between '" +
                            source.item_id + "' and '" + candidate.item_id +
                            "'");
  }
  return angular_distance(source.title_vec, candidate.title_vec) +
         angular_distance(source.desc_vec, candidate.desc_vec);
}

std::vector<RankedCandidate> rank(const std::string& source_id,
                                  std::span<const ItemEmbedding> catalog) {
  const auto src = std::find_if(
      catalog.begin(), catalog.end(),
      [&](const ItemEmbedding& e) { return e.item_id == source_id; });
  if (src == catalog.end()) {
    throw LookupError("unknown source id '" + source_id + "'");
  }
  std::vector<RankedCandidate> out;
  out.reserve(catalog.size());
  for (auto it = catalog.begin(); it != catalog.end(); ++it) {
    if (it == src) continue;
    out.push_back({it->item_id, 0, score(*src, *it)});
  }
  std::sort(out.begin(), out.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.score != b.score) return a.score < b.score;
              return a.item_id < b.item_id;
            });
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].rank = static_cast<int>(i + 1);
  }
  return out;
}

Rankings rank_all(std::span<const ItemEmbedding> catalog) {
  Rankings out;
  for (const ItemEmbedding& e : catalog) out[e.item_id] = rank(e.item_id, catalog);
  return out;
}

void write_embeddings(std::ostream& out, const CatalogEmbeddings& emb) {
  const std::size_t dim =
      emb.items.empty() ? 0 : emb.items.front().title_vec.size();
  out << json{{"schema", kEmbeddingSchema},
              {"version", 1},
              {"seed", emb.seed},
              {"dim", dim},
              {"truncated_texts", emb.truncated_texts}}
             .dump()
      << '\n';
  for (const ItemEmbedding& e : emb.items) {
    json record = json::object();
    record["item_id"] = e.item_id;
    record["title_vec"] = e.title_vec;
    record["desc_vec"] = e.desc_vec;
    out << record.dump() << '\n';
  }
}

CatalogEmbeddings parse_embeddings(std::istream& in,
                                   const std::string& source) {
  CatalogEmbeddings emb;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool header_seen = false;
  std::unordered_set<std::string> ids;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json record = json::parse(line);
      if (!header_seen) {
        if (record.value("schema", "") != kEmbeddingSchema ||
            record.value("version", 0) != 1) {
          throw IngestionError(source + ":" + std::to_string(line_no) +
                               ": expected embeddings schema header");
        }
        emb.seed = record.at("seed").get<std::uint64_t>();
        emb.truncated_texts = record.at("truncated_texts").get<std::size_t>();
        dim = record.at("dim").get<std::size_t>();
        header_seen = true;
        continue;
      }
      ItemEmbedding e{record.at("item_id").get<std::string>(),
                      record.at("title_vec").get<Vector>(),
                      record.at("desc_vec").get<Vector>()};
      if (e.title_vec.size() != dim || e.desc_vec.size() != dim) {
        throw IngestionError(source + ":" + std::to_string(line_no) +
                             ": embedding dimension differs from header");
      }
      if (!ids.insert(e.item_id).second) {
        throw IngestionError(source + ":" + std::to_string(line_no) +
                             ": duplicate item_id '" + e.item_id + "'");
      }
      emb.items.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw IngestionError(source + ":" + std::to_string(line_no) +
                         ": malformed embeddings record: " + e.what());
  }
  if (!header_seen) {
    throw IngestionError(source + ": missing embeddings schema header");
  }
  return emb;
}

std::string rankings_csv(const Rankings& rankings, std::uint64_t seed) {
  std::string out = "# seed=" + std::to_string(seed) + "\n";
  out += "source_id,candidate_id,rank,score\n";
  for (const auto& [source, candidates] : rankings) {
    for (const RankedCandidate& c : candidates) {
      out += source + "," + c.item_id + "," + std::to_string(c.rank) + "," +
             format_fixed(c.score) + "\n";
    }
  }
  return out;
}

Rankings parse_rankings_csv(std::istream& in, const std::string& source) {
  Rankings rankings;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto where = source + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (line != "source_id,candidate_id,rank,score") {
        throw IngestionError(where + ": unexpected rankings header");
      }
      header_seen = true;
      continue;
    }
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4) throw IngestionError(where + ": expected 4 fields");
    RankedCandidate c{f[1], 0, 0.0};
    const auto r = std::from_chars(f[2].data(), f[2].data() + f[2].size(),
                                   c.rank);
    const auto s = std::from_chars(f[3].data(), f[3].data() + f[3].size(),
                                   c.score);
    if (r.ec != std::errc() || s.ec != std::errc()) {
      throw IngestionError(where + ": malformed rank or score");
    }
    auto& list = rankings[f[0]];
    if (c.rank != static_cast<int>(list.size()) + 1) {
      throw IngestionError(where + ": ranks for '" + f[0] +
                           "' must be consecutive from 1");
    }
    list.push_back(std::move(c));
  }
  return rankings;
}

}  // namespace tripletlm
