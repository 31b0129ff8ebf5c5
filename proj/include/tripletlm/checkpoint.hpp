#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tripletlm/data.hpp"
#include "tripletlm/encoder.hpp"

namespace tripletlm {

/// Everything needed to rebuild an encoder and its tokenizer.
///
/// Layout: 8-byte magic "TLMCKPT1", little-endian u64 header length, a JSON
/// header (config, seed, vocabulary, tensor names and shapes), then every
/// tensor as raw little-endian IEEE-754 doubles in EncoderParams::for_each
/// order. Loading reproduces the saved values bit for bit.
struct Checkpoint {
  EncoderConfig encoder;
  std::uint64_t seed = 0;
  Vocabulary vocabulary;
  EncoderParams params;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tripletlm
