#include "pixeluq/attnviz.hpp"

#include <algorithm>
#include <charconv>

#include "pixeluq/errors.hpp"
#include "pixeluq/parallel.hpp"

namespace pixeluq {

AttentionGrid attention_grid(const AttentionTensor& a) {
  return {a.layers, a.heads, a.tokens, 1, a.weights, a.token_patch};
}

AttentionGrid mc_attention(const ModelWeights& weights, const RenderedImage& image, const PatchMask& mask,
                           const MCOptions& options) {
  if (options.n_passes < 2) throw ConfigError("n_passes must be at least 2");
  if (!(options.dropout_rate >= 0.0 && options.dropout_rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1)");
  const std::size_t P = weights.config.patch_size;
  RenderedImage img = image;
  img.patch_size = P;
  const PatchSequence seq = image_to_patches(img.is_strip() ? img : unwrap_to_strip(img, P));

  AttentionGrid grid;
  std::vector<double> sum;
  const std::size_t chunk = std::max<std::size_t>(2, 2 * worker_count());
  std::vector<AttentionTensor> buf;
  for (std::size_t first = 0; first < options.n_passes; first += chunk) {
    const std::size_t count = std::min(chunk, options.n_passes - first);
    buf.assign(count, AttentionTensor{});
    parallel_for(count, [&](std::size_t k) {
      const DropoutSpec dropout{true, options.dropout_rate, options.base_seed + first + k};
      buf[k] = forward(weights, seq, mask, dropout).attention;
    });
    for (const auto& a : buf) {
      if (sum.empty()) {
        grid = attention_grid(a);
        sum.assign(a.weights.size(), 0.0);
      }
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += a.weights[i];
    }
  }
  const double n = static_cast<double>(options.n_passes);
  for (std::size_t i = 0; i < sum.size(); ++i) grid.weights[i] = static_cast<float>(sum[i] / n);
  grid.n_passes = options.n_passes;
  return grid;
}

RenderedImage neuron_cell_image(const AttentionGrid& grid, std::size_t layer, std::size_t head,
                                std::size_t first_k) {
  if (layer >= grid.layers) throw IndexError("layer " + std::to_string(layer) + " out of range");
  if (head >= grid.heads) throw IndexError("head " + std::to_string(head) + " out of range");
  if (first_k < 1 || first_k > grid.n_tokens)
    throw IndexError("first_k " + std::to_string(first_k) + " outside [1, " + std::to_string(grid.n_tokens) + "]");

  double lo = grid.at(layer, head, 0, 0), hi = lo;
  for (std::size_t i = 0; i < first_k; ++i)
    for (std::size_t j = 0; j < first_k; ++j) {
      const double v = grid.at(layer, head, i, j);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double range = hi - lo;

  const std::size_t side = first_k * kCellPixels;
  RenderedImage out(side, side, 3, kCellPixels);
  for (std::size_t i = 0; i < first_k; ++i)
    for (std::size_t j = 0; j < first_k; ++j) {
      const double v = grid.at(layer, head, i, j);
      const Rgb c = colormap(range > 0.0 ? (v - lo) / range : 0.0);
      for (std::size_t y = i * kCellPixels; y < (i + 1) * kCellPixels; ++y)
        for (std::size_t x = j * kCellPixels; x < (j + 1) * kCellPixels; ++x)
          for (std::size_t k = 0; k < 3; ++k) out.at(y, x, k) = c[k];
    }
  return out;
}

RenderedImage model_grid_image(const AttentionGrid& grid, std::size_t first_k) {
  if (grid.layers == 0 || grid.heads == 0) throw EmptyInputError("attention grid has no layers or heads");
  const std::size_t cell = first_k * kCellPixels, sep = kGridSeparator;
  const std::size_t H = grid.layers * cell + (grid.layers + 1) * sep;
  const std::size_t W = grid.heads * cell + (grid.heads + 1) * sep;
  RenderedImage out(H, W, 3, kCellPixels, 1.0f);
  for (std::size_t l = 0; l < grid.layers; ++l)
    for (std::size_t h = 0; h < grid.heads; ++h) {
      const RenderedImage c = neuron_cell_image(grid, l, h, first_k);
      const std::size_t y0 = sep + l * (cell + sep), x0 = sep + h * (cell + sep);
      for (std::size_t y = 0; y < cell; ++y)
        std::copy_n(&c.pixels[c.index(y, 0)], cell * 3, &out.pixels[out.index(y0 + y, x0)]);
    }
  return out;
}

void write_attention_csv(const AttentionGrid& grid, std::ostream& out) {
  out << "layer,head,i,j,weight\n";
  char buf[64];
  for (std::size_t l = 0; l < grid.layers; ++l)
    for (std::size_t h = 0; h < grid.heads; ++h)
      for (std::size_t i = 0; i < grid.n_tokens; ++i)
        for (std::size_t j = 0; j < grid.n_tokens; ++j) {
          const auto res = std::to_chars(buf, buf + sizeof buf, grid.at(l, h, i, j));
          out << l << ',' << h << ',' << i << ',' << j << ',' << std::string_view(buf, res.ptr - buf) << '\n';
        }
}

}  // namespace pixeluq
