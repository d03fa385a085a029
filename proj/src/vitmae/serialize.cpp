#include <zlib.h>

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pixeluq/errors.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {
namespace {

constexpr const char* kFormatTag = "pixeluq-weights";
constexpr int kFormatVersion = 1;

std::string crc_hex(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace

std::string serialize_weights(const ModelWeights& w) {
  std::string blob;
  blob.reserve(w.parameter_count() * 4);
  nlohmann::json manifest = nlohmann::json::array();
  w.visit([&](const std::string& name, ParamKind, const Tensor<float>& t) {
    manifest.push_back({{"name", name}, {"shape", t.shape}});
    for (float v : t.data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  });
  nlohmann::json header{{"format", kFormatTag},   {"version", kFormatVersion},   {"config", w.config},
                        {"tensors", manifest},    {"blob_bytes", blob.size()},  {"crc32", crc_hex(blob)}};
  return header.dump() + "\n" + blob;
}

ModelWeights deserialize_weights(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw CorruptWeightsError("missing header line");
  nlohmann::json header;
  ModelConfig cfg;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
    if (header.at("format") != kFormatTag || header.at("version") != kFormatVersion)
      throw CorruptWeightsError("unrecognized format tag or version");
    cfg = header.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptWeightsError(std::string("unreadable header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptWeightsError(std::string("invalid config in header: ") + e.what());
  }

  const std::string_view blob = bytes.substr(newline + 1);
  auto w = ModelWeights::zeros(cfg);
  const std::size_t expected = w.parameter_count() * 4;
  try {
    if (header.at("blob_bytes").get<std::size_t>() != expected)
      throw CorruptWeightsError("header blob length disagrees with the declared config");
    const auto& manifest = header.at("tensors");
    std::size_t i = 0;
    w.visit([&](const std::string& name, ParamKind, const Tensor<float>& t) {
      if (i >= manifest.size() || manifest[i].at("name") != name ||
          manifest[i].at("shape").get<std::vector<std::size_t>>() != t.shape)
        throw CorruptWeightsError("tensor manifest disagrees with the declared config at " + name);
      ++i;
    });
    if (i != manifest.size()) throw CorruptWeightsError("tensor manifest has extra entries");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptWeightsError(std::string("malformed manifest: ") + e.what());
  }
  if (blob.size() != expected)
    throw CorruptWeightsError("blob holds " + std::to_string(blob.size()) + " bytes, expected " +
                              std::to_string(expected));
  if (header.at("crc32") != crc_hex(blob)) throw CorruptWeightsError("checksum mismatch");

  std::size_t pos = 0;
  w.visit([&](const std::string&, ParamKind, Tensor<float>& t) {
    for (auto& v : t.data) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[pos++])) << (8 * b);
      v = std::bit_cast<float>(bits);
    }
  });
  return w;
}

void save_weights(const ModelWeights& w, const std::filesystem::path& path) {
  const std::string bytes = serialize_weights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weights to " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read weights from " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_weights(buf.str());
}

}  // namespace pixeluq
