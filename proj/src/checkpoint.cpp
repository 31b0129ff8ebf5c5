#include "tripletlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <nlohmann/json.hpp>

#include "tripletlm/errors.hpp"
#include "tripletlm/io.hpp"

namespace tripletlm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::string_view kMagic = "TLMCKPT1";

using nlohmann::json;

json config_to_json(const EncoderConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},
              {"n_layers", c.n_layers},     {"n_heads", c.n_heads},
              {"max_seq_len", c.max_seq_len}, {"seed", c.seed},
              {"init", std::string(to_string(c.init))}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init = init_mode_from_string(j.at("init").get<std::string>());
  c.validate();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json tensors = json::array();
  std::size_t total = 0;
  ckpt.params.for_each([&](const std::string& name, auto values,
                           const std::vector<std::size_t>& shape) {
    tensors.push_back({{"name", name}, {"shape", shape}});
    total += values.size();
  });
  const json header{{"format_version", 1},
                    {"encoder", config_to_json(ckpt.encoder)},
                    {"seed", ckpt.seed},
                    {"vocabulary", ckpt.vocabulary.tokens()},
                    {"tensors", tensors}};
  const std::string header_text = header.dump();
  const std::uint64_t header_len = header_text.size();

  std::string out;
  out.reserve(kMagic.size() + 8 + header_text.size() + total * 8);
  out += kMagic;
  char len_bytes[8];
  std::memcpy(len_bytes, &header_len, 8);
  out.append(len_bytes, 8);
  out += header_text;
  ckpt.params.for_each([&](const std::string&, std::span<const double> values,
                           const auto&) {
    out.append(reinterpret_cast<const char*>(values.data()),
               values.size() * sizeof(double));
  });
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + kMagic.size(), 8);
  std::size_t offset = kMagic.size() + 8;
  if (header_len > bytes.size() - offset) {
    throw CheckpointError("truncated checkpoint header");
  }
  Checkpoint ckpt;
  try {
    const json header = json::parse(bytes.substr(offset, header_len));
    if (header.at("format_version").get<int>() != 1) {
      throw CheckpointError("unsupported checkpoint format version");
    }
    ckpt.encoder = config_from_json(header.at("encoder"));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.vocabulary =
        Vocabulary(header.at("vocabulary").get<std::vector<std::string>>());
    ckpt.params = EncoderParams::zeros(ckpt.encoder);
    const json& tensors = header.at("tensors");
    std::size_t index = 0;
    ckpt.params.for_each([&](const std::string& name, std::span<double>,
                             const std::vector<std::size_t>& shape) {
      if (index >= tensors.size() ||
          tensors[index].at("name").get<std::string>() != name ||
          tensors[index].at("shape").get<std::vector<std::size_t>>() !=
              shape) {
        throw CheckpointError("tensor '" + name +
                              "' missing or has an unexpected shape");
      }
      ++index;
    });
    if (index != tensors.size()) {
      throw CheckpointError("checkpoint holds unexpected extra tensors");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") +
                          e.what());
  }
  if (ckpt.vocabulary.size() > ckpt.encoder.vocab_size) {
    throw CheckpointError("vocabulary larger than the encoder's vocab_size");
  }
  offset += header_len;
  ckpt.params.for_each(
      [&](const std::string& name, std::span<double> values, const auto&) {
        const std::size_t n = values.size() * sizeof(double);
        if (bytes.size() - offset < n) {
          throw CheckpointError("truncated data for tensor '" + name + "'");
        }
        std::memcpy(values.data(), bytes.data() + offset, n);
        offset += n;
      });
  if (offset != bytes.size()) {
    throw CheckpointError("trailing bytes after checkpoint data");
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace tripletlm
