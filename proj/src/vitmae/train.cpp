#include <cmath>
#include <optional>

#include "pixeluq/errors.hpp"
#include "pixeluq/random.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {

TrainStepResult train_step(const ModelWeights& w, std::span<const TrainExample> batch, double lr,
                           const DropoutSpec& dropout, double visible_weight) {
  auto grad = ModelWeights::zeros(w.config);
  TrainStepResult result{w, 0.0};
  result.loss = masked_reconstruction_loss(w, batch, dropout, &grad, visible_weight);
  if (!std::isfinite(result.loss)) throw NumericsError("training loss is not finite");
  if (lr == 0.0) return result;

  std::vector<const Tensor<float>*> grads;
  grad.visit([&](const std::string&, ParamKind, const Tensor<float>& t) { grads.push_back(&t); });
  std::size_t i = 0;
  result.weights.visit([&](const std::string&, ParamKind, Tensor<float>& t) {
    const auto& g = grads[i++]->data;
    for (std::size_t k = 0; k < t.size(); ++k) t.data[k] -= static_cast<float>(lr * g[k]);
  });
  return result;
}

AdamOptimizer::AdamOptimizer(const ModelConfig& cfg, AdamOptions options)
    : options_(options), m_(ModelWeights::zeros(cfg)), v_(ModelWeights::zeros(cfg)) {
  if (!(options.lr >= 0.0) || !(options.beta1 >= 0.0 && options.beta1 < 1.0) ||
      !(options.beta2 >= 0.0 && options.beta2 < 1.0) || !(options.epsilon > 0.0))
    throw ConfigError("invalid Adam options");
}

double AdamOptimizer::step(ModelWeights& w, std::span<const TrainExample> batch, const DropoutSpec& dropout,
                           double visible_weight) {
  if (!(w.config == m_.config)) throw ConfigError("optimizer state was built for a different config");
  auto grad = ModelWeights::zeros(w.config);
  const double loss = masked_reconstruction_loss(w, batch, dropout, &grad, visible_weight);
  if (!std::isfinite(loss)) throw NumericsError("training loss is not finite");
  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));

  std::vector<Tensor<float>*> gs, ms, vs;
  grad.visit([&](const std::string&, ParamKind, Tensor<float>& t) { gs.push_back(&t); });
  m_.visit([&](const std::string&, ParamKind, Tensor<float>& t) { ms.push_back(&t); });
  v_.visit([&](const std::string&, ParamKind, Tensor<float>& t) { vs.push_back(&t); });
  std::size_t i = 0;
  w.visit([&](const std::string&, ParamKind, Tensor<float>& t) {
    auto& g = gs[i]->data;
    auto& m = ms[i]->data;
    auto& v = vs[i]->data;
    ++i;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double gk = g[k];
      const double mk = options_.beta1 * m[k] + (1.0 - options_.beta1) * gk;
      const double vk = options_.beta2 * v[k] + (1.0 - options_.beta2) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      t.data[k] -= static_cast<float>(options_.lr * (mk / c1) / (std::sqrt(vk / c2) + options_.epsilon));
    }
  });
  return loss;
}

TrainReport train_model(ModelWeights weights, std::span<const PatchSequence> corpus, const TrainOptions& options,
                        const std::function<void(std::size_t, double)>& progress) {
  weights.config.validate();
  options.mask.validate();
  if (corpus.empty()) throw EmptyInputError("empty training corpus");
  if (options.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(options.mask_ratio_min >= 0.0 && options.mask_ratio_min <= options.mask_ratio_max &&
        options.mask_ratio_max <= 1.0))
    throw ConfigError("mask ratio range must satisfy 0 <= min <= max <= 1");

  Rng rng(mix_seed(options.seed, 0x7472));
  std::optional<AdamOptimizer> adam;
  if (options.optimizer == OptimizerKind::Adam) adam.emplace(weights.config, AdamOptions{.lr = options.lr});
  const double rate = weights.config.dropout_rate;

  TrainReport report;
  report.losses.reserve(options.steps);
  std::vector<TrainExample> batch(options.batch_size);
  for (std::size_t s = 0; s < options.steps; ++s) {
    for (auto& ex : batch) {
      ex.patches = corpus[rng.below(corpus.size())];
      MaskSpec spec = options.mask;
      spec.ratio = options.mask_ratio_min + (options.mask_ratio_max - options.mask_ratio_min) * rng.uniform();
      ex.mask = sample_span_mask(ex.patches.num_patches, spec, rng.next_u64());
    }
    const DropoutSpec dropout{options.dropout && rate > 0.0, rate, mix_seed(options.seed, s)};
    double loss;
    if (adam) {
      loss = adam->step(weights, batch, dropout, options.visible_weight);
    } else {
      auto r = train_step(weights, batch, options.lr, dropout, options.visible_weight);
      weights = std::move(r.weights);
      loss = r.loss;
    }
    report.losses.push_back(loss);
    if (progress) progress(s, loss);
  }
  report.weights = std::move(weights);
  return report;
}

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.patch_size = 4;
  cfg.channels = 1;
  cfg.embed_dim = 8;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.mlp_ratio = 2.0;
  cfg.decoder_dim = 8;
  cfg.decoder_layers = 1;
  cfg.max_patches = 4;
  cfg.dropout_rate = 0.1;
  return cfg;
}

GradcheckReport finite_diff_gradcheck(const ModelConfig& cfg, std::uint64_t seed, double step) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0x6772));
  const std::size_t N = cfg.max_patches;

  // random pixels, roughly half the patches masked (at least one)
  TrainExample ex;
  ex.patches.patch_size = cfg.patch_size;
  ex.patches.channels = cfg.channels;
  ex.patches.num_patches = N;
  ex.patches.data.resize(N * cfg.patch_dim());
  for (auto& v : ex.patches.data) v = static_cast<float>(rng.uniform());
  std::vector<std::uint8_t> flags(N, 0);
  for (auto& f : flags) f = rng.uniform() < 0.5 ? 1 : 0;
  flags[rng.below(N)] = 1;
  ex.mask = PatchMask::from_flags(std::move(flags));
  const std::span<const TrainExample> batch(&ex, 1);

  const DropoutSpec dropout{cfg.dropout_rate > 0.0, cfg.dropout_rate, mix_seed(seed, 0x64)};
  auto w = cast_weights<double>(init_weights(cfg, seed));
  // non-trivial norm parameters and biases so their gradients are exercised
  w.visit([&](const std::string&, ParamKind kind, Tensor<double>& t) {
    if (kind == ParamKind::Bias || kind == ParamKind::NormOffset)
      for (auto& v : t.data) v = 0.1 * rng.normal();
    else if (kind == ParamKind::NormScale)
      for (auto& v : t.data) v = 1.0 + 0.1 * rng.normal();
  });

  auto analytic = BasicWeights<double>::zeros(cfg);
  GradcheckReport report;
  report.loss = masked_reconstruction_loss(w, batch, dropout, &analytic);

  std::vector<const Tensor<double>*> grads;
  analytic.visit([&](const std::string&, ParamKind, const Tensor<double>& t) { grads.push_back(&t); });

  auto central = [&](double& param, double h) {
    const double saved = param;
    param = saved + h;
    const double up = masked_reconstruction_loss<double>(w, batch, dropout, nullptr);
    param = saved - h;
    const double down = masked_reconstruction_loss<double>(w, batch, dropout, nullptr);
    param = saved;
    return (up - down) / (2.0 * h);
  };

  double sq_err = 0.0, sq_err_2 = 0.0;
  std::size_t tensor_index = 0;
  w.visit([&](const std::string& name, ParamKind, Tensor<double>& t) {
    const auto& g = grads[tensor_index++]->data;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double ga = g[k];
      const double gf = central(t.data[k], step);
      const double gf2 = central(t.data[k], 2.0 * step);
      const double rel = std::abs(ga - gf) / std::max(1e-8, std::abs(ga) + std::abs(gf));
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = rel;
        report.worst_parameter = name + "[" + std::to_string(k) + "]";
      }
      sq_err += (gf - ga) * (gf - ga);
      sq_err_2 += (gf2 - ga) * (gf2 - ga);
      ++report.parameters_checked;
    }
  });
  report.error_norm_step = std::sqrt(sq_err);
  report.error_norm_double_step = std::sqrt(sq_err_2);
  return report;
}

}  // namespace pixeluq
