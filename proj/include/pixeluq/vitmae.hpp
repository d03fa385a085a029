#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixeluq/textrender.hpp"

namespace pixeluq {

// Geometry and hyperparameters of the masked-autoencoder transformer. The
// decoder uses the same head count as the encoder.
struct ModelConfig {
  std::size_t patch_size = kDefaultPatchSize;
  std::size_t channels = 1;
  std::size_t embed_dim = 32;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  double mlp_ratio = 2.0;
  std::size_t decoder_dim = 32;
  std::size_t decoder_layers = 1;
  std::size_t max_patches = kDefaultMaxPatches;
  double dropout_rate = 0.1;

  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t mlp_hidden(std::size_t dim) const;

  // Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);
ModelConfig load_model_config(const std::filesystem::path& path);

template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, T fill = T(0)) : shape(std::move(s)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

template <typename T>
struct LayerNormParams {
  Tensor<T> scale;
  Tensor<T> offset;
  friend bool operator==(const LayerNormParams&, const LayerNormParams&) = default;
};

template <typename T>
struct BlockParams {
  LayerNormParams<T> attn_norm;
  LinearParams<T> query, key, value, output;
  LayerNormParams<T> mlp_norm;
  LinearParams<T> mlp_in, mlp_out;
  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

enum class ParamKind { LinearWeight, Bias, NormScale, NormOffset, Embedding };

template <typename T>
struct BasicWeights {
  ModelConfig config;

  LinearParams<T> patch_projection;
  Tensor<T> positional_embeddings;  // [max_patches + 1, embed_dim], row 0 belongs to CLS
  Tensor<T> cls_embedding;          // [embed_dim]
  std::vector<BlockParams<T>> encoder;
  LayerNormParams<T> encoder_norm;

  LinearParams<T> decoder_projection;
  Tensor<T> mask_embedding;                 // [decoder_dim]
  Tensor<T> decoder_positional_embeddings;  // [max_patches + 1, decoder_dim]
  std::vector<BlockParams<T>> decoder;
  LayerNormParams<T> decoder_norm;
  LinearParams<T> reconstruction_head;  // decoder_dim -> patch_dim

  // Zero-filled weights with the shapes implied by cfg.
  static BasicWeights zeros(const ModelConfig& cfg);

  // Calls fn(name, kind, tensor) for every tensor in a fixed manifest order.
  template <typename Fn>
  void visit(Fn&& fn) {
    visit_impl(*this, fn);
  }
  template <typename Fn>
  void visit(Fn&& fn) const {
    visit_impl(*this, fn);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, ParamKind, const Tensor<T>& t) { n += t.size(); });
    return n;
  }

  friend bool operator==(const BasicWeights&, const BasicWeights&) = default;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn);
};

using ModelWeights = BasicWeights<float>;

template <typename To, typename From>
BasicWeights<To> cast_weights(const BasicWeights<From>& w);

// Deterministic for fixed (cfg, seed): linear weights ~ N(0, 1/fan_in), biases
// 0, norm scale 1 / offset 0, embeddings ~ N(0, 0.02^2). Throws ConfigError.
ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

// Span-masking policy. span_weights is a cumulative distribution over
// span_lengths.
struct MaskSpec {
  double ratio = 0.25;
  std::vector<std::size_t> span_lengths{1, 2, 3, 4, 5, 6};
  std::vector<double> span_weights{0.2, 0.4, 0.6, 0.8, 0.9, 1.0};
  std::uint64_t seed = 0;

  void validate() const;  // Throws ConfigError.
};

void to_json(nlohmann::json& j, const MaskSpec& spec);
void from_json(const nlohmann::json& j, MaskSpec& spec);

struct MaskSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  friend bool operator==(const MaskSpan&, const MaskSpan&) = default;
};

struct PatchMask {
  std::vector<std::uint8_t> flags;  // 1 = masked
  double realized_ratio = 0.0;
  std::vector<MaskSpan> spans;  // drawn spans in placement order; may overlap earlier spans

  static PatchMask none(std::size_t num_patches);
  static PatchMask from_flags(std::vector<std::uint8_t> flags);

  std::size_t size() const { return flags.size(); }
  std::size_t masked_count() const;
  bool masked(std::size_t i) const { return flags[i] != 0; }

  friend bool operator==(const PatchMask&, const PatchMask&) = default;
};

// Draws spans until round(R*N) patches are masked (see README for the exact
// procedure). Deterministic for fixed inputs.
PatchMask sample_span_mask(std::size_t num_patches, const MaskSpec& spec, std::uint64_t rng_seed);

struct DropoutSpec {
  bool enabled = false;
  double rate = 0.0;
  std::uint64_t pass_seed = 0;
};

// Raw attention probabilities, [layers][heads][tokens][tokens]. Token 0 is CLS;
// token t > 0 stands for patch token_patch[t]. The encoder sees only visible
// patches, so tokens == visible patches + 1.
struct AttentionTensor {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t tokens = 0;
  std::vector<float> weights;
  std::vector<std::ptrdiff_t> token_patch;  // -1 for CLS

  std::size_t offset(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return ((l * heads + h) * tokens + i) * tokens + j;
  }
  float at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const { return weights[offset(l, h, i, j)]; }

  friend bool operator==(const AttentionTensor&, const AttentionTensor&) = default;
};

struct ForwardOutput {
  RenderedImage pred_pixels;  // single strip, unclamped
  AttentionTensor attention;
  std::vector<float> cls_vector;
  // Residual stream of the first encoder block after its attention sublayer,
  // [tokens, embed_dim]. Only independent dropout factors enter it
  // multiplicatively, so its mean over pass seeds is the dropout-free value.
  std::vector<float> first_attention_residual;
};

// Throws GeometryError for sequences longer than max_patches or a mask of the
// wrong length, NumericsError for non-finite weights.
ForwardOutput forward(const ModelWeights& w, const PatchSequence& seq, const PatchMask& mask,
                      const DropoutSpec& dropout = {});

struct TrainExample {
  PatchSequence patches;
  PatchMask mask;
};

// Mean squared error over masked pixels of the whole batch (0 when nothing is
// masked) and, if grad is non-null, its gradient accumulated into *grad. Each
// example uses dropout seed mix_seed(dropout.pass_seed, index).
//
// visible_weight > 0 adds visible pixels to the average with that relative
// weight: loss = sum(w_i * e_i^2) / sum(w_i), w_i = 1 masked, visible_weight
// visible. The default 0 is the pure masked-pixel loss.
template <typename T>
double masked_reconstruction_loss(const BasicWeights<T>& w, std::span<const TrainExample> batch,
                                  const DropoutSpec& dropout, BasicWeights<T>* grad, double visible_weight = 0.0);

struct TrainStepResult {
  ModelWeights weights;
  double loss = 0.0;  // before the update
};

// One plain gradient-descent step. Throws NumericsError on a non-finite loss.
TrainStepResult train_step(const ModelWeights& w, std::span<const TrainExample> batch, double lr,
                           const DropoutSpec& dropout = {}, double visible_weight = 0.0);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction; moment estimates live in the optimizer.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelConfig& cfg, AdamOptions options);

  // Updates w in place and returns the pre-update loss. Throws NumericsError on a non-finite loss.
  double step(ModelWeights& w, std::span<const TrainExample> batch, const DropoutSpec& dropout = {},
              double visible_weight = 0.0);
  std::size_t steps_taken() const { return t_; }

 private:
  AdamOptions options_;
  ModelWeights m_, v_;
  std::size_t t_ = 0;
};

enum class OptimizerKind { Sgd, Adam };

struct TrainOptions {
  std::size_t steps = 6000;
  std::size_t batch_size = 8;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 2e-3;
  // Each example draws its mask ratio uniformly from [mask_ratio_min, mask_ratio_max];
  // span lengths and weights come from `mask`.
  MaskSpec mask;
  double mask_ratio_min = 0.1;
  double mask_ratio_max = 0.9;
  double visible_weight = 0.1;
  bool dropout = true;  // at the configured rate
  std::uint64_t seed = 0;
};

struct TrainReport {
  ModelWeights weights;
  std::vector<double> losses;  // one per step
};

// Mini-batch training on a corpus of patch sequences. Deterministic for fixed inputs.
TrainReport train_model(ModelWeights weights, std::span<const PatchSequence> corpus, const TrainOptions& options,
                        const std::function<void(std::size_t step, double loss)>& progress = {});

// Micro configuration used for gradient checking: 4 patches of 4x4, D=8, one layer each side.
ModelConfig micro_config();

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
  double loss = 0.0;
  // L2 norm of (finite-difference - analytic) over all parameters, at step and 2*step.
  double error_norm_step = 0.0;
  double error_norm_double_step = 0.0;
};

// Compares the analytic gradient of the masked-reconstruction loss (computed
// in double precision, dropout active with a fixed seed) against central
// differences for every parameter.
GradcheckReport finite_diff_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double step = 1e-4);

// Weights file: one JSON header line, then the little-endian float32 blob in manifest order.
void save_weights(const ModelWeights& w, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);
std::string serialize_weights(const ModelWeights& w);
ModelWeights deserialize_weights(std::string_view bytes);

}  // namespace pixeluq

#include "pixeluq/detail/weights_visit.hpp"
