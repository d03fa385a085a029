#include <algorithm>
#include <cmath>
#include <sstream>

#include "pixeluq/colormap_data.hpp"
#include "pixeluq/errors.hpp"
#include "pixeluq/mcuq.hpp"

namespace pixeluq {

const std::vector<std::array<std::uint8_t, 3>>& colormap_table() {
  static const auto table = [] {
    std::vector<std::array<std::uint8_t, 3>> t;
    std::istringstream in{std::string(embedded::viridis_table_text)};
    int r, g, b;
    while (in >> r >> g >> b)
      t.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
    if (t.size() != 256) throw FormatError("embedded colormap must have 256 entries");
    return t;
  }();
  return table;
}

Rgb colormap(double t) {
  if (std::isnan(t)) t = 0.0;
  const double c = std::clamp(t, 0.0, 1.0);
  const auto idx = std::min<std::size_t>(255, static_cast<std::size_t>(std::floor(c * 255.0 + 0.5)));
  const auto& e = colormap_table()[idx];
  return {e[0] / 255.0f, e[1] / 255.0f, e[2] / 255.0f};
}

namespace {

// Per-pixel scalar (channel mean), min-max normalized; constant input maps to 0.
std::vector<double> normalized_values(const RenderedImage& img) {
  const std::size_t n = img.height * img.width;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < img.channels; ++c) s += img.pixels[i * img.channels + c];
    v[i] = s / static_cast<double>(img.channels);
  }
  if (v.empty()) return v;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mn = *lo, range = *hi - *lo;
  for (auto& x : v) x = range > 0.0 ? (x - mn) / range : 0.0;
  return v;
}

}  // namespace

RenderedImage heatmap(const RenderedImage& values) {
  if (values.pixels.empty()) throw EmptyInputError("empty image");
  const auto v = normalized_values(values);
  RenderedImage out(values.height, values.width, 3, values.patch_size);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Rgb c = colormap(v[i]);
    std::copy(c.begin(), c.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(3 * i));
  }
  return out;
}

RenderedImage overlay_uncertainty(const RenderedImage& base, const RenderedImage& u) {
  if (base.height != u.height || base.width != u.width)
    throw GeometryError("overlay base and uncertainty map differ in size");
  if (base.pixels.empty()) throw EmptyInputError("empty image");
  const RenderedImage rgb = to_rgb(base);
  if (rgb.channels != 3) throw GeometryError("overlay base must have 1 or 3 channels");
  const auto v = normalized_values(u);
  RenderedImage out(base.height, base.width, 3, base.patch_size);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Rgb c = colormap(v[i]);
    for (std::size_t k = 0; k < 3; ++k) out.pixels[3 * i + k] = 0.5f * rgb.pixels[3 * i + k] + 0.5f * c[k];
  }
  return out;
}

}  // namespace pixeluq
