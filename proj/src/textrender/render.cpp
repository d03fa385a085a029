#include <algorithm>

#include "pixeluq/errors.hpp"
#include "pixeluq/textrender.hpp"

namespace pixeluq {

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    // reject overlong forms and surrogates
    if (ok && ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) ||
               (cp >= 0xD800 && cp <= 0xDFFF)))
      ok = false;
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(0xFFFD);
      i += 1;
    }
  }
  return out;
}

RenderedImage render_text(std::string_view text, const GlyphAtlas& atlas, std::size_t max_patches) {
  if (text.empty()) throw EmptyInputError("cannot render empty text");
  if (max_patches < 1) throw ConfigError("max_patches must be at least 1");
  const std::u32string cps = decode_utf8(text);
  const std::size_t P = atlas.glyph_height();
  const std::size_t gw = atlas.glyph_width();
  const std::size_t ink_width = cps.size() * gw;
  const std::size_t patches = std::min(max_patches, (ink_width + P - 1) / P);

  RenderedImage img(P, patches * P, 1, P);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const std::size_t x0 = i * gw;
    if (x0 >= img.width) break;
    const GlyphBitmap& g = atlas.glyph(cps[i]);
    for (std::size_t y = 0; y < P; ++y)
      for (std::size_t x = 0; x < gw; ++x)
        if (g[y * gw + x]) img.at(y, x0 + x) = 1.0f;
  }
  return img;
}

PatchSequence image_to_patches(const RenderedImage& img) {
  const std::size_t P = img.patch_size;
  if (P == 0 || img.height != P || img.width == 0 || img.width % P != 0 ||
      img.pixels.size() != img.height * img.width * img.channels)
    throw GeometryError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                        " is not a single strip of " + std::to_string(P) + "-pixel patches");
  PatchSequence seq;
  seq.patch_size = P;
  seq.channels = img.channels;
  seq.num_patches = img.width / P;
  seq.data.resize(img.pixels.size());
  const std::size_t C = img.channels;
  std::size_t k = 0;
  for (std::size_t n = 0; n < seq.num_patches; ++n)
    for (std::size_t y = 0; y < P; ++y) {
      const float* row = &img.pixels[img.index(y, n * P)];
      std::copy(row, row + P * C, seq.data.begin() + static_cast<std::ptrdiff_t>(k));
      k += P * C;
    }
  return seq;
}

RenderedImage patches_to_image(const PatchSequence& seq) {
  if (seq.num_patches == 0) throw EmptyInputError("empty patch sequence");
  if (seq.data.size() != seq.num_patches * seq.patch_dim()) throw GeometryError("patch buffer size mismatch");
  const std::size_t P = seq.patch_size, C = seq.channels;
  RenderedImage img(P, seq.num_patches * P, C, P);
  std::size_t k = 0;
  for (std::size_t n = 0; n < seq.num_patches; ++n)
    for (std::size_t y = 0; y < P; ++y) {
      std::copy(seq.data.begin() + static_cast<std::ptrdiff_t>(k),
                seq.data.begin() + static_cast<std::ptrdiff_t>(k + P * C), &img.pixels[img.index(y, n * P)]);
      k += P * C;
    }
  return img;
}

RenderedImage wrap_strip(const RenderedImage& strip, std::size_t patches_per_row) {
  if (!strip.is_strip()) throw GeometryError("wrap_strip expects a single-strip image");
  if (patches_per_row == 0) throw ConfigError("patches_per_row must be positive");
  const std::size_t P = strip.patch_size, C = strip.channels;
  const std::size_t n = strip.num_patches();
  const std::size_t cols = std::min(patches_per_row, n);
  const std::size_t rows = (n + cols - 1) / cols;
  RenderedImage out(rows * P, cols * P, C, P);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = i / cols, c = i % cols;
    for (std::size_t y = 0; y < P; ++y)
      std::copy_n(&strip.pixels[strip.index(y, i * P)], P * C, &out.pixels[out.index(r * P + y, c * P)]);
  }
  return out;
}

RenderedImage unwrap_to_strip(const RenderedImage& img, std::size_t patch_size) {
  const std::size_t P = patch_size;
  if (P == 0 || img.height == 0 || img.width == 0 || img.height % P != 0 || img.width % P != 0)
    throw GeometryError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                        " is not tiled by " + std::to_string(P) + "-pixel patches");
  const std::size_t rows = img.height / P, cols = img.width / P, C = img.channels;
  RenderedImage out(P, rows * cols * P, C, P);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      for (std::size_t y = 0; y < P; ++y)
        std::copy_n(&img.pixels[img.index(r * P + y, c * P)], P * C, &out.pixels[out.index(y, (r * cols + c) * P)]);
  return out;
}

RenderedImage to_grayscale(const RenderedImage& img) {
  if (img.channels == 1) return img;
  RenderedImage out(img.height, img.width, 1, img.patch_size);
  for (std::size_t i = 0; i < img.height * img.width; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < img.channels; ++c) s += img.pixels[i * img.channels + c];
    out.pixels[i] = static_cast<float>(s / static_cast<double>(img.channels));
  }
  return out;
}

RenderedImage to_rgb(const RenderedImage& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw GeometryError("to_rgb expects 1 or 3 channels");
  RenderedImage out(img.height, img.width, 3, img.patch_size);
  for (std::size_t i = 0; i < img.height * img.width; ++i)
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = img.pixels[i];
  return out;
}

}  // namespace pixeluq
