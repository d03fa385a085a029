#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "pixeluq/errors.hpp"
#include "pixeluq/textrender.hpp"

namespace pixeluq {
namespace {

std::vector<std::uint8_t> to_bytes(const RenderedImage& img, std::size_t out_channels) {
  std::vector<std::uint8_t> bytes(img.height * img.width * out_channels);
  for (std::size_t i = 0; i < img.height * img.width; ++i)
    for (std::size_t c = 0; c < out_channels; ++c) {
      const std::size_t src = img.channels == 1 ? 0 : c;
      bytes[i * out_channels + c] = quantize(img.pixels[i * img.channels + src]);
    }
  return bytes;
}

void check_writable(const RenderedImage& img) {
  if (img.height == 0 || img.width == 0) throw GeometryError("cannot write an empty image");
  if (img.channels != 1 && img.channels != 3)
    throw FormatError("only 1- or 3-channel images can be written, got " + std::to_string(img.channels));
  if (img.pixels.size() != img.height * img.width * img.channels) throw GeometryError("pixel buffer size mismatch");
}

// Reads one PNM header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

RenderedImage read_ppm(const std::filesystem::path& path, std::size_t patch_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (next_token(in) != "P6") throw FormatError(path.string() + " is not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  if (w == 0 || h == 0 || maxval != 255) throw FormatError(path.string() + ": unsupported PPM geometry or maxval");
  // next_token consumed exactly one whitespace byte after maxval
  std::vector<std::uint8_t> bytes(w * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw FormatError(path.string() + ": truncated PPM");
  RenderedImage img(h, w, 3, patch_size);
  std::transform(bytes.begin(), bytes.end(), img.pixels.begin(), [](std::uint8_t b) { return b / 255.0f; });
  return img;
}

RenderedImage read_png(const std::filesystem::path& path, std::size_t patch_size) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw FormatError(path.string() + ": " + image.message);
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr))
    throw FormatError(path.string() + ": " + image.message);
  RenderedImage img(image.height, image.width, channels, patch_size);
  std::transform(bytes.begin(), bytes.end(), img.pixels.begin(), [](std::uint8_t b) { return b / 255.0f; });
  return img;
}

}  // namespace

std::uint8_t quantize(float v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

ImageFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ppm") return ImageFormat::Ppm;
  if (ext == ".png") return ImageFormat::Png;
  throw FormatError("unsupported image extension '" + ext + "' (expected .ppm or .png)");
}

std::string encode_ppm(const RenderedImage& img) {
  check_writable(img);
  const auto bytes = to_bytes(img, 3);
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(bytes.begin(), bytes.end());
  return out;
}

void write_image(const RenderedImage& img, const std::filesystem::path& path, ImageFormat format) {
  check_writable(img);
  if (format == ImageFormat::Ppm) {
    const std::string data = encode_ppm(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed for " + path.string());
    return;
  }
  const auto bytes = to_bytes(img, img.channels);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("cannot write " + path.string() + ": " + image.message);
}

void write_image(const RenderedImage& img, const std::filesystem::path& path) {
  write_image(img, path, format_from_path(path));
}

RenderedImage read_image(const std::filesystem::path& path, ChannelMode mode, std::size_t patch_size) {
  if (!std::filesystem::exists(path)) throw IoError("no such image: " + path.string());
  const ImageFormat format = format_from_path(path);
  RenderedImage img = format == ImageFormat::Ppm ? read_ppm(path, patch_size) : read_png(path, patch_size);
  return mode == ChannelMode::Gray ? to_grayscale(img) : img;
}

}  // namespace pixeluq
