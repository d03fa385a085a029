#pragma once

// Template definitions for BasicWeights; included from vitmae.hpp.

namespace pixeluq {

template <typename T>
template <typename Self, typename Fn>
void BasicWeights<T>::visit_impl(Self& self, Fn& fn) {
  auto linear = [&](const std::string& name, auto& p) {
    fn(name + ".weight", ParamKind::LinearWeight, p.weight);
    fn(name + ".bias", ParamKind::Bias, p.bias);
  };
  auto norm = [&](const std::string& name, auto& p) {
    fn(name + ".scale", ParamKind::NormScale, p.scale);
    fn(name + ".offset", ParamKind::NormOffset, p.offset);
  };
  auto block = [&](const std::string& name, auto& b) {
    norm(name + ".attn_norm", b.attn_norm);
    linear(name + ".query", b.query);
    linear(name + ".key", b.key);
    linear(name + ".value", b.value);
    linear(name + ".output", b.output);
    norm(name + ".mlp_norm", b.mlp_norm);
    linear(name + ".mlp_in", b.mlp_in);
    linear(name + ".mlp_out", b.mlp_out);
  };

  linear("patch_projection", self.patch_projection);
  fn(std::string("positional_embeddings"), ParamKind::Embedding, self.positional_embeddings);
  fn(std::string("cls_embedding"), ParamKind::Embedding, self.cls_embedding);
  for (std::size_t i = 0; i < self.encoder.size(); ++i) block("encoder." + std::to_string(i), self.encoder[i]);
  norm("encoder_norm", self.encoder_norm);
  linear("decoder_projection", self.decoder_projection);
  fn(std::string("mask_embedding"), ParamKind::Embedding, self.mask_embedding);
  fn(std::string("decoder_positional_embeddings"), ParamKind::Embedding, self.decoder_positional_embeddings);
  for (std::size_t i = 0; i < self.decoder.size(); ++i) block("decoder." + std::to_string(i), self.decoder[i]);
  norm("decoder_norm", self.decoder_norm);
  linear("reconstruction_head", self.reconstruction_head);
}

template <typename T>
BasicWeights<T> BasicWeights<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  auto linear = [](std::size_t in, std::size_t out) {
    return LinearParams<T>{Tensor<T>({out, in}), Tensor<T>({out})};
  };
  auto norm = [](std::size_t dim) { return LayerNormParams<T>{Tensor<T>({dim}), Tensor<T>({dim})}; };
  auto block = [&](std::size_t dim) {
    const std::size_t hidden = cfg.mlp_hidden(dim);
    return BlockParams<T>{norm(dim),         linear(dim, dim),    linear(dim, dim), linear(dim, dim),
                          linear(dim, dim),  norm(dim),           linear(dim, hidden), linear(hidden, dim)};
  };
  const std::size_t D = cfg.embed_dim, Dd = cfg.decoder_dim;
  BasicWeights w;
  w.config = cfg;
  w.patch_projection = linear(cfg.patch_dim(), D);
  w.positional_embeddings = Tensor<T>({cfg.max_patches + 1, D});
  w.cls_embedding = Tensor<T>({D});
  for (std::size_t i = 0; i < cfg.num_layers; ++i) w.encoder.push_back(block(D));
  w.encoder_norm = norm(D);
  w.decoder_projection = linear(D, Dd);
  w.mask_embedding = Tensor<T>({Dd});
  w.decoder_positional_embeddings = Tensor<T>({cfg.max_patches + 1, Dd});
  for (std::size_t i = 0; i < cfg.decoder_layers; ++i) w.decoder.push_back(block(Dd));
  w.decoder_norm = norm(Dd);
  w.reconstruction_head = linear(Dd, cfg.patch_dim());
  return w;
}

template <typename To, typename From>
BasicWeights<To> cast_weights(const BasicWeights<From>& w) {
  auto out = BasicWeights<To>::zeros(w.config);
  std::vector<const Tensor<From>*> src;
  w.visit([&](const std::string&, ParamKind, const Tensor<From>& t) { src.push_back(&t); });
  std::size_t i = 0;
  out.visit([&](const std::string&, ParamKind, Tensor<To>& t) {
    const auto& s = *src[i++];
    for (std::size_t k = 0; k < t.size(); ++k) t.data[k] = static_cast<To>(s.data[k]);
  });
  return out;
}

}  // namespace pixeluq
