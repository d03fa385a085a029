#include <cmath>

#include "pixeluq/errors.hpp"
#include "pixeluq/mcuq.hpp"

namespace pixeluq {
namespace {

void require_same(const RenderedImage& a, const RenderedImage& b, const char* what) {
  if (!a.same_geometry(b) || a.pixels.size() != b.pixels.size())
    throw GeometryError(std::string(what) + ": image shapes differ");
  if (a.pixels.empty()) throw EmptyInputError(std::string(what) + ": empty image");
}

}  // namespace

RenderedImage per_patch_uncertainty(const RenderedImage& sd, std::size_t P) {
  if (P == 0 || sd.height == 0 || sd.width == 0 || sd.height % P != 0 || sd.width % P != 0)
    throw GeometryError("sd image " + std::to_string(sd.height) + "x" + std::to_string(sd.width) +
                        " is not tiled by " + std::to_string(P) + "-pixel patches");
  RenderedImage u(sd.height, sd.width, sd.channels, P);
  const std::size_t C = sd.channels;
  for (std::size_t py = 0; py < sd.height; py += P)
    for (std::size_t px = 0; px < sd.width; px += P) {
      double s = 0.0;
      for (std::size_t y = py; y < py + P; ++y)
        for (std::size_t x = px; x < px + P; ++x)
          for (std::size_t c = 0; c < C; ++c) s += sd.at(y, x, c);
      const auto mean = static_cast<float>(s / static_cast<double>(P * P * C));
      for (std::size_t y = py; y < py + P; ++y)
        for (std::size_t x = px; x < px + P; ++x)
          for (std::size_t c = 0; c < C; ++c) u.at(y, x, c) = mean;
    }
  return u;
}

double mean_uncertainty(const RenderedImage& sd) {
  if (sd.pixels.empty()) throw EmptyInputError("empty sd image");
  double s = 0.0;
  for (float v : sd.pixels) s += v;
  return s / static_cast<double>(sd.pixels.size());
}

double mse_loss(const RenderedImage& pred, const RenderedImage& img) {
  require_same(pred, img, "mse_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const double d = static_cast<double>(pred.pixels[i]) - img.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.pixels.size());
}

double rmse(const RenderedImage& pred, const RenderedImage& img) { return std::sqrt(mse_loss(pred, img)); }

double gnll_loss(const RenderedImage& pred, const RenderedImage& img, const RenderedImage& var, double eps) {
  require_same(pred, img, "gnll_loss");
  require_same(pred, var, "gnll_loss");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const double v = var.pixels[i];
    if (v < 0.0) throw DomainError("negative variance at element " + std::to_string(i));
    const double vc = std::max(v, eps);
    const double d = static_cast<double>(pred.pixels[i]) - img.pixels[i];
    s += std::log(vc) + d * d / vc;
  }
  return s / static_cast<double>(pred.pixels.size());
}

}  // namespace pixeluq
