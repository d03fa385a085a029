#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pixeluq/textrender.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {

using Rgb = std::array<float, 3>;

// 256-entry dark-to-bright table; t in [0, 1] picks entry min(255, floor(t*255 + 0.5)).
Rgb colormap(double t);
const std::vector<std::array<std::uint8_t, 3>>& colormap_table();

struct MCResult {
  RenderedImage mean_image;       // mu
  RenderedImage sd_image;         // sigma, population SD over passes
  RenderedImage uncertainty_map;  // U, constant within each patch
  double sigma_bar = 0.0;
  double mse = 0.0;
  double gnll = 0.0;
  double rmse = 0.0;
  std::size_t n_passes = 0;
  double dropout_rate = 0.0;
  std::uint64_t base_seed = 0;
  std::vector<RenderedImage> passes;  // only filled when requested
};

// One stochastic forward pass for the given seed.
using PassFunction = std::function<RenderedImage(std::uint64_t pass_seed)>;

struct MCOptions {
  std::size_t n_passes = 100;
  double dropout_rate = 0.1;
  std::uint64_t base_seed = 0;
  bool keep_passes = false;
};

// Generic engine: runs pass(base_seed + i) for i < n_passes (in parallel),
// folds the results in pass order, and scores mu against `original`.
// Throws ConfigError for n_passes < 2, GeometryError if a pass disagrees with
// the original's geometry.
MCResult mc_predict(const PassFunction& pass, const RenderedImage& original, const MCOptions& options);

// Model-backed passes. Multi-row images are unwrapped to a strip for the
// model and predictions are wrapped back to the input layout.
MCResult mc_predict(const ModelWeights& weights, const RenderedImage& image, const PatchMask& mask,
                    const MCOptions& options = {});

RenderedImage per_patch_uncertainty(const RenderedImage& sd_image, std::size_t patch_size);
double mean_uncertainty(const RenderedImage& sd_image);
double mse_loss(const RenderedImage& pred, const RenderedImage& img);
double rmse(const RenderedImage& pred, const RenderedImage& img);
// Throws DomainError for negative variance.
double gnll_loss(const RenderedImage& pred, const RenderedImage& img, const RenderedImage& var, double eps = 1e-6);

// U min-max normalized, colour-mapped and blended 50/50 over the base (replicated to RGB).
RenderedImage overlay_uncertainty(const RenderedImage& base, const RenderedImage& u);
// Min-max normalized values through the colormap, no blending.
RenderedImage heatmap(const RenderedImage& values);

nlohmann::json mc_result_json(const MCResult& r);

// Writes mc_result.json, mean, sd_heatmap, uncertainty_overlay (on the
// original) and reconstruction_overlay (on mu). Returns the written paths.
std::vector<std::filesystem::path> write_mc_outputs(const MCResult& r, const RenderedImage& original,
                                                    const std::filesystem::path& dir, ImageFormat format,
                                                    const nlohmann::json& extra = nlohmann::json::object());

}  // namespace pixeluq
