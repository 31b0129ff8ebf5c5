#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tripletlm/checkpoint.hpp"
#include "tripletlm/data.hpp"
#include "tripletlm/geometry.hpp"

namespace tripletlm {

struct ItemEmbedding {
  std::string item_id;
  Vector title_vec;
  Vector desc_vec;
  bool operator==(const ItemEmbedding&) const = default;
};

struct CatalogEmbeddings {
  std::vector<ItemEmbedding> items;
  std::size_t truncated_texts = 0;  // texts cut to max_seq_len
  std::uint64_t seed = 0;           // seed of the producing checkpoint
};

/// Pooled title and description embeddings for every item, unmasked.
CatalogEmbeddings embed_catalog(const Catalog& items, const Checkpoint& ckpt);

/// d(title_s, title_c) + d(desc_s, desc_c); lower is more similar.
double score(const ItemEmbedding& source, const ItemEmbedding& candidate);

struct RankedCandidate {
  std::string item_id;
  int rank = 0;  // 1-based
  double score = 0.0;
  bool operator==(const RankedCandidate&) const = default;
};

/// Every item other than the source, ascending by score, ties by item id.
std::vector<RankedCandidate> rank(const std::string& source_id,
                                  std::span<const ItemEmbedding> catalog);

using Rankings = std::map<std::string, std::vector<RankedCandidate>>;

Rankings rank_all(std::span<const ItemEmbedding> catalog);

// Line-delimited JSON; vectors keep full double precision.
void write_embeddings(std::ostream& out, const CatalogEmbeddings& emb);
CatalogEmbeddings parse_embeddings(std::istream& in,
                                   const std::string& source = "<stream>");

/// CSV rows source_id,candidate_id,rank,score after a `# seed=` line.
std::string rankings_csv(const Rankings& rankings, std::uint64_t seed);
Rankings parse_rankings_csv(std::istream& in,
                            const std::string& source = "<stream>");

}  // namespace tripletlm
