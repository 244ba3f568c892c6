#include "segmicro/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace segmicro {

namespace {

void write_le_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_le_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  return v;
}

void write_le_f32_block(std::ostream& out, const float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], sizeof(bits));
    unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xFF),
        static_cast<unsigned char>((bits >> 8) & 0xFF),
        static_cast<unsigned char>((bits >> 16) & 0xFF),
        static_cast<unsigned char>((bits >> 24) & 0xFF)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

void read_le_f32_block(std::istream& in, float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    std::memcpy(&data[i], &bits, sizeof(float));
  }
}

}  // namespace

void save_checkpoint(const Graph<float>& graph, const CheckpointMeta& meta,
                     const std::string& path) {
  json header;
  header["format"] = 1;
  header["model"] = detail::model_config_to_json(graph.config());
  header["optimizer"] = meta.optimizer_kind;
  header["epoch"] = meta.epoch;
  header["val_loss"] = meta.val_loss;

  json tensors = json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < graph.num_params(); ++i) {
    const ConvParams<float>& p = graph.param(i);
    const Shape4& ks = p.kernel.shape();
    json kernel;
    kernel["name"] = graph.param_name(i) + ".kernel";
    kernel["shape"] = {ks.batch, ks.height, ks.width, ks.channels};
    kernel["offset"] = offset;
    kernel["bytes"] = p.kernel.size() * 4;
    offset += p.kernel.size() * 4;
    tensors.push_back(std::move(kernel));

    json bias;
    bias["name"] = graph.param_name(i) + ".bias";
    bias["shape"] = {static_cast<int>(p.bias.size())};
    bias["offset"] = offset;
    bias["bytes"] = p.bias.size() * 4;
    offset += p.bias.size() * 4;
    tensors.push_back(std::move(bias));
  }
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out << kCheckpointMagic << "\n";
    write_le_u64(out, header_text.size());
    out.write(header_text.data(),
              static_cast<std::streamsize>(header_text.size()));
    for (std::size_t i = 0; i < graph.num_params(); ++i) {
      const ConvParams<float>& p = graph.param(i);
      write_le_f32_block(out, p.kernel.data(), p.kernel.size());
      write_le_f32_block(out, p.bias.data(), p.bias.size());
    }
    if (!out) throw DataError("failed writing checkpoint '" + path + "'");
  }
  fs::rename(tmp, target);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");

  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic) {
    throw DataError("'" + path + "': bad checkpoint magic");
  }
  const std::uint64_t header_len = read_le_u64(in);
  if (!in || header_len == 0 || header_len > (1u << 20)) {
    throw DataError("'" + path + "': invalid header length");
  }
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("'" + path + "': truncated header");

  json header;
  ModelConfig config;
  try {
    header = json::parse(header_text);
    config =
        detail::model_config_from_json(header.at("model"), "checkpoint model");
  } catch (const json::exception& e) {
    throw DataError("'" + path + "': bad checkpoint header: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("'" + path + "': bad checkpoint header: " + e.what());
  }
  LoadedCheckpoint out{Graph<float>::build(config, 0), CheckpointMeta{}};
  out.meta.optimizer_kind = header.value("optimizer", "");
  out.meta.epoch = header.value("epoch", 0);
  out.meta.val_loss = header.value("val_loss", 0.0);

  try {
    const json& tensors = header.at("tensors");
    if (tensors.size() != out.graph.num_params() * 2) {
      throw DataError("'" + path + "': header lists " +
                      std::to_string(tensors.size()) +
                      " tensors, the model needs " +
                      std::to_string(out.graph.num_params() * 2));
    }
    for (std::size_t i = 0; i < out.graph.num_params(); ++i) {
      ConvParams<float>& p = out.graph.param(i);
      const json& kernel = tensors[2 * i];
      const json& bias = tensors[2 * i + 1];
      const Shape4& ks = p.kernel.shape();
      const std::vector<int> expect_kernel{ks.batch, ks.height, ks.width,
                                           ks.channels};
      if (kernel.at("shape").get<std::vector<int>>() != expect_kernel) {
        throw DataError("'" + path + "': tensor '" +
                        kernel.value("name", "?") +
                        "' shape does not match the model config");
      }
      if (bias.at("shape").get<std::vector<int>>() !=
          std::vector<int>{static_cast<int>(p.bias.size())}) {
        throw DataError("'" + path + "': tensor '" + bias.value("name", "?") +
                        "' shape does not match the model config");
      }
      read_le_f32_block(in, p.kernel.data(), p.kernel.size());
      read_le_f32_block(in, p.bias.data(), p.bias.size());
      if (!in) throw DataError("'" + path + "': truncated payload");
    }
  } catch (const json::exception& e) {
    throw DataError("'" + path + "': bad checkpoint header: " + e.what());
  }
  return out;
}

}  // namespace segmicro
