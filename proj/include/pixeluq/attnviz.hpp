#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "pixeluq/mcuq.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {

inline constexpr std::size_t kCellPixels = 16;
inline constexpr std::size_t kGridSeparator = 2;

// Attention averaged over MC passes, [layers][heads][tokens][tokens]; token 0 is CLS.
struct AttentionGrid {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t n_tokens = 0;
  std::size_t n_passes = 0;
  std::vector<float> weights;
  std::vector<std::ptrdiff_t> token_patch;  // -1 for CLS

  std::size_t offset(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return ((l * heads + h) * n_tokens + i) * n_tokens + j;
  }
  float at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const { return weights[offset(l, h, i, j)]; }

  friend bool operator==(const AttentionGrid&, const AttentionGrid&) = default;
};

// Single deterministic pass (n_passes = 1).
AttentionGrid attention_grid(const AttentionTensor& attention);

// Elementwise mean of the per-pass attention tensors, summed in pass order in
// double precision. Throws ConfigError for n_passes < 2.
AttentionGrid mc_attention(const ModelWeights& weights, const RenderedImage& image, const PatchMask& mask,
                           const MCOptions& options = {});

// first_k x first_k block of A(l, h), min-max normalized, 16 px per cell.
// Throws IndexError for out-of-range l, h or first_k.
RenderedImage neuron_cell_image(const AttentionGrid& grid, std::size_t layer, std::size_t head,
                                std::size_t first_k = 16);

// layers x heads tiling of cell images with 2 px white separators and border.
RenderedImage model_grid_image(const AttentionGrid& grid, std::size_t first_k = 16);

// Header "layer,head,i,j,weight", one row per entry.
void write_attention_csv(const AttentionGrid& grid, std::ostream& out);

}  // namespace pixeluq
