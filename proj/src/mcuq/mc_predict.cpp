#include <algorithm>
#include <cmath>
#include <fstream>

#include "pixeluq/errors.hpp"
#include "pixeluq/mcuq.hpp"
#include "pixeluq/parallel.hpp"

namespace pixeluq {

MCResult mc_predict(const PassFunction& pass, const RenderedImage& original, const MCOptions& options) {
  if (options.n_passes < 2) throw ConfigError("n_passes must be at least 2");
  if (!(options.dropout_rate >= 0.0 && options.dropout_rate < 1.0))
    throw ConfigError("dropout rate must lie in [0, 1)");
  if (original.pixels.empty()) throw EmptyInputError("empty image");

  const std::size_t n = original.pixels.size();
  std::vector<double> mean(n, 0.0), m2(n, 0.0);
  MCResult r;
  if (options.keep_passes) r.passes.reserve(options.n_passes);

  // Passes run in parallel chunks; Welford updates are applied in pass order,
  // so the result does not depend on scheduling.
  const std::size_t chunk = std::max<std::size_t>(2, 2 * worker_count());
  std::vector<RenderedImage> buf;
  for (std::size_t first = 0; first < options.n_passes; first += chunk) {
    const std::size_t count = std::min(chunk, options.n_passes - first);
    buf.assign(count, RenderedImage{});
    parallel_for(count, [&](std::size_t k) { buf[k] = pass(options.base_seed + first + k); });
    for (std::size_t k = 0; k < count; ++k) {
      const RenderedImage& p = buf[k];
      if (!p.same_geometry(original) || p.pixels.size() != n)
        throw GeometryError("pass output geometry differs from the input image");
      const double cnt = static_cast<double>(first + k + 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = p.pixels[i];
        const double delta = x - mean[i];
        mean[i] += delta / cnt;
        m2[i] += delta * (x - mean[i]);
      }
      if (options.keep_passes) r.passes.push_back(std::move(buf[k]));
    }
  }

  const std::size_t P = original.patch_size;
  r.mean_image = RenderedImage(original.height, original.width, original.channels, P);
  r.sd_image = r.mean_image;
  RenderedImage var = r.mean_image;
  const double N = static_cast<double>(options.n_passes);
  for (std::size_t i = 0; i < n; ++i) {
    r.mean_image.pixels[i] = static_cast<float>(mean[i]);
    const double v = std::max(0.0, m2[i] / N);
    r.sd_image.pixels[i] = static_cast<float>(std::sqrt(v));
    var.pixels[i] = static_cast<float>(v);
  }
  r.uncertainty_map = per_patch_uncertainty(r.sd_image, P);
  r.sigma_bar = mean_uncertainty(r.sd_image);
  r.mse = mse_loss(r.mean_image, original);
  r.rmse = std::sqrt(r.mse);
  r.gnll = gnll_loss(r.mean_image, original, var);
  r.n_passes = options.n_passes;
  r.dropout_rate = options.dropout_rate;
  r.base_seed = options.base_seed;
  return r;
}

MCResult mc_predict(const ModelWeights& weights, const RenderedImage& image, const PatchMask& mask,
                    const MCOptions& options) {
  const std::size_t P = weights.config.patch_size;
  if (image.channels != weights.config.channels)
    throw GeometryError("image has " + std::to_string(image.channels) + " channels, model expects " +
                        std::to_string(weights.config.channels));
  RenderedImage original = image;
  original.patch_size = P;
  const bool strip = original.is_strip();
  const PatchSequence seq = image_to_patches(strip ? original : unwrap_to_strip(original, P));
  const std::size_t per_row = original.width / P;
  auto pass = [&](std::uint64_t seed) {
    const DropoutSpec dropout{true, options.dropout_rate, seed};
    RenderedImage pred = forward(weights, seq, mask, dropout).pred_pixels;
    if (strip) return pred;
    return wrap_strip(pred, per_row);
  };
  return mc_predict(PassFunction(pass), original, options);
}

nlohmann::json mc_result_json(const MCResult& r) {
  return {
      {"sigma_bar", r.sigma_bar},
      {"mse", r.mse},
      {"rmse", r.rmse},
      {"gnll", r.gnll},
      {"n_passes", r.n_passes},
      {"dropout_rate", r.dropout_rate},
      {"base_seed", r.base_seed},
      {"height", r.mean_image.height},
      {"width", r.mean_image.width},
      {"channels", r.mean_image.channels},
      {"patch_size", r.mean_image.patch_size},
  };
}

std::vector<std::filesystem::path> write_mc_outputs(const MCResult& r, const RenderedImage& original,
                                                    const std::filesystem::path& dir, ImageFormat format,
                                                    const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  const std::string ext = format == ImageFormat::Png ? ".png" : ".ppm";
  std::vector<std::filesystem::path> written;

  nlohmann::json j = mc_result_json(r);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  const auto json_path = dir / "mc_result.json";
  {
    std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + json_path.string());
    out << j.dump(2) << '\n';
  }
  written.push_back(json_path);

  auto emit = [&](const RenderedImage& img, const std::string& stem) {
    const auto path = dir / (stem + ext);
    write_image(img, path, format);
    written.push_back(path);
  };
  emit(r.mean_image, "mean");
  emit(heatmap(r.sd_image), "sd_heatmap");
  emit(overlay_uncertainty(original, r.uncertainty_map), "uncertainty_overlay");
  emit(overlay_uncertainty(r.mean_image, r.uncertainty_map), "reconstruction_overlay");
  return written;
}

}  // namespace pixeluq
