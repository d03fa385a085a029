#include <cmath>
#include <fstream>
#include <set>

#include "pixeluq/errors.hpp"
#include "pixeluq/random.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {
namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ConfigError(std::string("unknown ") + what + " field '" + key + "'");
}

}  // namespace

std::size_t ModelConfig::mlp_hidden(std::size_t dim) const {
  const auto h = static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(dim)));
  return h == 0 ? 1 : h;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(patch_size, "patch_size");
  positive(channels, "channels");
  positive(embed_dim, "embed_dim");
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(decoder_dim, "decoder_dim");
  positive(decoder_layers, "decoder_layers");
  positive(max_patches, "max_patches");
  if (embed_dim % num_heads != 0) throw ConfigError("embed_dim must be divisible by num_heads");
  if (decoder_dim % num_heads != 0) throw ConfigError("decoder_dim must be divisible by num_heads");
  if (!(mlp_ratio > 0.0) || !std::isfinite(mlp_ratio)) throw ConfigError("mlp_ratio must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"patch_size", c.patch_size},         {"channels", c.channels},
                     {"embed_dim", c.embed_dim},           {"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},           {"mlp_ratio", c.mlp_ratio},
                     {"decoder_dim", c.decoder_dim},       {"decoder_layers", c.decoder_layers},
                     {"max_patches", c.max_patches},       {"dropout_rate", c.dropout_rate}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  reject_unknown(j,
                 {"patch_size", "channels", "embed_dim", "num_layers", "num_heads", "mlp_ratio", "decoder_dim",
                  "decoder_layers", "max_patches", "dropout_rate"},
                 "model config");
  read_field(j, "patch_size", c.patch_size);
  read_field(j, "channels", c.channels);
  read_field(j, "embed_dim", c.embed_dim);
  read_field(j, "num_layers", c.num_layers);
  read_field(j, "num_heads", c.num_heads);
  read_field(j, "mlp_ratio", c.mlp_ratio);
  read_field(j, "decoder_dim", c.decoder_dim);
  read_field(j, "decoder_layers", c.decoder_layers);
  read_field(j, "max_patches", c.max_patches);
  read_field(j, "dropout_rate", c.dropout_rate);
  c.validate();
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return j.get<ModelConfig>();
}

void MaskSpec::validate() const {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mask ratio must lie in [0, 1]");
  if (span_lengths.empty()) throw ConfigError("span_lengths must not be empty");
  if (span_lengths.size() != span_weights.size()) throw ConfigError("span_lengths and span_weights differ in length");
  for (std::size_t i = 0; i < span_lengths.size(); ++i) {
    if (span_lengths[i] < 1) throw ConfigError("span lengths must be positive");
    if (i > 0 && span_lengths[i] <= span_lengths[i - 1]) throw ConfigError("span_lengths must be strictly increasing");
    if (!(span_weights[i] >= 0.0 && span_weights[i] <= 1.0)) throw ConfigError("span_weights must lie in [0, 1]");
    if (i > 0 && span_weights[i] < span_weights[i - 1]) throw ConfigError("span_weights must be non-decreasing");
  }
  if (span_weights.back() != 1.0) throw ConfigError("last span weight must be 1");
}

void to_json(nlohmann::json& j, const MaskSpec& s) {
  j = nlohmann::json{{"ratio", s.ratio}, {"span_lengths", s.span_lengths}, {"span_weights", s.span_weights},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, MaskSpec& s) {
  reject_unknown(j, {"ratio", "span_lengths", "span_weights", "seed"}, "mask spec");
  read_field(j, "ratio", s.ratio);
  read_field(j, "span_lengths", s.span_lengths);
  read_field(j, "span_weights", s.span_weights);
  read_field(j, "seed", s.seed);
  s.validate();
}

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto w = ModelWeights::zeros(cfg);
  Rng rng(seed);
  w.visit([&](const std::string&, ParamKind kind, Tensor<float>& t) {
    switch (kind) {
      case ParamKind::LinearWeight: {
        const double scale = 1.0 / std::sqrt(static_cast<double>(t.shape[1]));
        for (auto& v : t.data) v = static_cast<float>(rng.normal() * scale);
        break;
      }
      case ParamKind::Embedding:
        for (auto& v : t.data) v = static_cast<float>(rng.normal() * 0.02);
        break;
      case ParamKind::NormScale:
        std::fill(t.data.begin(), t.data.end(), 1.0f);
        break;
      case ParamKind::Bias:
      case ParamKind::NormOffset:
        break;
    }
  });
  return w;
}

}  // namespace pixeluq
