#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pixeluq {

inline constexpr std::size_t kDefaultPatchSize = 16;
inline constexpr std::size_t kDefaultMaxPatches = 529;

// Raster of intensities, row-major with interleaved channels.
//
// Rendered text is a single strip (height == patch_size) whose width is a
// multiple of patch_size; `is_strip()` checks that layout. The same type also
// carries model predictions and visualizations, which need not be strips and
// may hold values outside [0, 1] (predictions are unclamped).
struct RenderedImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t patch_size = kDefaultPatchSize;
  std::vector<float> pixels;

  RenderedImage() = default;
  RenderedImage(std::size_t h, std::size_t w, std::size_t c, std::size_t p = kDefaultPatchSize, float fill = 0.0f)
      : height(h), width(w), channels(c), patch_size(p), pixels(h * w * c, fill) {}

  std::size_t index(std::size_t y, std::size_t x, std::size_t c = 0) const { return (y * width + x) * channels + c; }
  float& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[index(y, x, c)]; }
  float at(std::size_t y, std::size_t x, std::size_t c = 0) const { return pixels[index(y, x, c)]; }

  std::size_t num_patches() const { return patch_size == 0 ? 0 : width / patch_size; }
  bool is_strip() const {
    return patch_size > 0 && height == patch_size && width > 0 && width % patch_size == 0 &&
           pixels.size() == height * width * channels;
  }
  bool same_geometry(const RenderedImage& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const RenderedImage&, const RenderedImage&) = default;
};

// Patches in left-to-right order, each stored as a P*P*C block (row-major,
// channels interleaved) inside one contiguous buffer.
struct PatchSequence {
  std::size_t patch_size = kDefaultPatchSize;
  std::size_t channels = 1;
  std::size_t num_patches = 0;
  std::vector<float> data;

  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::span<const float> patch(std::size_t i) const { return {data.data() + i * patch_dim(), patch_dim()}; }
  std::span<float> patch(std::size_t i) { return {data.data() + i * patch_dim(), patch_dim()}; }

  friend bool operator==(const PatchSequence&, const PatchSequence&) = default;
};

// 0/1 bit matrix, glyph_height rows of glyph_width entries.
using GlyphBitmap = std::vector<std::uint8_t>;

class GlyphAtlas {
 public:
  GlyphAtlas(std::size_t glyph_width, std::size_t glyph_height, std::map<char32_t, GlyphBitmap> glyphs,
             GlyphBitmap fallback);

  std::size_t glyph_width() const { return glyph_width_; }
  std::size_t glyph_height() const { return glyph_height_; }
  std::size_t size() const { return glyphs_.size(); }
  bool contains(char32_t cp) const { return glyphs_.contains(cp); }

  // Bitmap for `cp`, or the fallback glyph for unknown codepoints.
  const GlyphBitmap& glyph(char32_t cp) const;
  const GlyphBitmap& fallback() const { return fallback_; }

 private:
  std::size_t glyph_width_;
  std::size_t glyph_height_;
  std::map<char32_t, GlyphBitmap> glyphs_;
  GlyphBitmap fallback_;
};

// Parses the atlas text format:
//   ATLAS <glyph_width> <glyph_height>
//   GLYPH <codepoint-decimal>
//   <glyph_height lines of glyph_width chars in {'.', '#'}>
//   ...
// A glyph for U+FFFD, if present, replaces the built-in box fallback.
GlyphAtlas parse_atlas(std::string_view text, std::size_t patch_size = kDefaultPatchSize);
GlyphAtlas load_atlas_file(const std::filesystem::path& path, std::size_t patch_size = kDefaultPatchSize);
// 8x16 monospace glyphs for printable ASCII and Latin-1.
const GlyphAtlas& builtin_atlas();

// "builtin" or a path to an atlas file.
GlyphAtlas load_atlas(const std::string& source, std::size_t patch_size = kDefaultPatchSize);

// UTF-8 to codepoints; malformed sequences decode to U+FFFD.
std::u32string decode_utf8(std::string_view text);

// Single-strip rendering: background 0, ink 1, glyphs at glyph_width pitch,
// right edge zero-padded to a patch boundary, truncated at max_patches.
RenderedImage render_text(std::string_view text, const GlyphAtlas& atlas = builtin_atlas(),
                          std::size_t max_patches = kDefaultMaxPatches);

PatchSequence image_to_patches(const RenderedImage& img);
RenderedImage patches_to_image(const PatchSequence& seq);

// Display helpers: a strip re-flowed into rows of `patches_per_row` patches
// (last row zero-padded), and a multi-row image flattened back into a strip in
// row-major patch order.
RenderedImage wrap_strip(const RenderedImage& strip, std::size_t patches_per_row);
RenderedImage unwrap_to_strip(const RenderedImage& img, std::size_t patch_size = kDefaultPatchSize);

// 3-channel images averaged to 1 channel; 1-channel images returned unchanged.
RenderedImage to_grayscale(const RenderedImage& img);
// 1-channel images replicated to 3 channels; 3-channel images returned unchanged.
RenderedImage to_rgb(const RenderedImage& img);

enum class ImageFormat { Ppm, Png };
enum class ChannelMode { Native, Gray };

// Intensity to byte: round-half-up of v*255 after clamping v to [0, 1].
std::uint8_t quantize(float v);

ImageFormat format_from_path(const std::filesystem::path& path);
void write_image(const RenderedImage& img, const std::filesystem::path& path, ImageFormat format);
void write_image(const RenderedImage& img, const std::filesystem::path& path);
// PPM-P6 always yields 3 channels in Native mode; PNG yields its stored
// channel count (alpha dropped). Gray mode averages to one channel.
RenderedImage read_image(const std::filesystem::path& path, ChannelMode mode = ChannelMode::Native,
                         std::size_t patch_size = kDefaultPatchSize);

// PPM-P6 bytes, as written by write_image.
std::string encode_ppm(const RenderedImage& img);

}  // namespace pixeluq
