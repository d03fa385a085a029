#include <charconv>
#include <fstream>
#include <sstream>

#include "pixeluq/builtin_atlas_data.hpp"
#include "pixeluq/errors.hpp"
#include "pixeluq/textrender.hpp"

namespace pixeluq {
namespace {

constexpr char32_t kReplacementChar = 0xFFFD;

GlyphBitmap box_glyph(std::size_t w, std::size_t h) {
  GlyphBitmap g(w * h, 0);
  if (w < 3 || h < 5) return g;
  // hollow rectangle inset by one pixel, leaving a gap above and below
  const std::size_t top = 2, bottom = h - 3;
  for (std::size_t x = 1; x + 1 < w; ++x) {
    g[top * w + x] = 1;
    g[bottom * w + x] = 1;
  }
  for (std::size_t y = top; y <= bottom; ++y) {
    g[y * w + 1] = 1;
    g[y * w + (w - 2)] = 1;
  }
  return g;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : text_(text) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const auto end = text_.find('\n', pos_);
    const auto stop = end == std::string_view::npos ? text_.size() : end;
    line = trim(text_.substr(pos_, stop - pos_));
    pos_ = stop + 1;
    ++line_no_;
    return true;
  }
  // Skips blank lines.
  bool next_nonblank(std::string_view& line) {
    while (next(line))
      if (!line.empty()) return true;
    return false;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

GlyphAtlas::GlyphAtlas(std::size_t glyph_width, std::size_t glyph_height, std::map<char32_t, GlyphBitmap> glyphs,
                       GlyphBitmap fallback)
    : glyph_width_(glyph_width), glyph_height_(glyph_height), glyphs_(std::move(glyphs)), fallback_(std::move(fallback)) {
  const std::size_t cells = glyph_width_ * glyph_height_;
  auto valid = [cells](const GlyphBitmap& g) {
    if (g.size() != cells) return false;
    for (auto b : g)
      if (b > 1) return false;
    return true;
  };
  if (!valid(fallback_)) throw AtlasFormatError("fallback glyph has wrong size or non-binary entries");
  for (const auto& [cp, g] : glyphs_)
    if (!valid(g)) throw AtlasFormatError("glyph " + std::to_string(static_cast<std::uint32_t>(cp)) + " is malformed");
}

const GlyphBitmap& GlyphAtlas::glyph(char32_t cp) const {
  auto it = glyphs_.find(cp);
  return it == glyphs_.end() ? fallback_ : it->second;
}

GlyphAtlas parse_atlas(std::string_view text, std::size_t patch_size) {
  LineCursor cursor(text);
  std::string_view line;
  if (!cursor.next_nonblank(line) || !line.starts_with("ATLAS"))
    throw AtlasFormatError("missing 'ATLAS <glyph_width> <glyph_height>' header");

  std::istringstream header{std::string(line.substr(5))};
  long w = 0, h = 0;
  std::string extra;
  if (!(header >> w >> h) || (header >> extra) || w <= 0 || h <= 0)
    throw AtlasFormatError("malformed header line: '" + std::string(line) + "'");
  const auto gw = static_cast<std::size_t>(w);
  const auto gh = static_cast<std::size_t>(h);
  if (gh != patch_size)
    throw AtlasGeometryError("glyph height " + std::to_string(gh) + " differs from patch size " +
                             std::to_string(patch_size));
  if (patch_size % gw != 0)
    throw AtlasGeometryError("patch size " + std::to_string(patch_size) + " is not a multiple of glyph width " +
                             std::to_string(gw));

  std::map<char32_t, GlyphBitmap> glyphs;
  while (cursor.next_nonblank(line)) {
    if (!line.starts_with("GLYPH"))
      throw AtlasFormatError("line " + std::to_string(cursor.line_no()) + ": expected GLYPH, got '" +
                             std::string(line) + "'");
    std::uint32_t cp = 0;
    if (!parse_number(line.substr(5), cp) || cp > 0x10FFFF)
      throw AtlasFormatError("line " + std::to_string(cursor.line_no()) + ": bad codepoint");
    GlyphBitmap bits;
    bits.reserve(gw * gh);
    for (std::size_t row = 0; row < gh; ++row) {
      if (!cursor.next(line)) throw AtlasFormatError("truncated glyph " + std::to_string(cp));
      if (line.size() != gw)
        throw AtlasFormatError("line " + std::to_string(cursor.line_no()) + ": glyph row has " +
                               std::to_string(line.size()) + " columns, expected " + std::to_string(gw));
      for (char ch : line) {
        if (ch == '#')
          bits.push_back(1);
        else if (ch == '.')
          bits.push_back(0);
        else
          throw AtlasFormatError("line " + std::to_string(cursor.line_no()) + ": invalid glyph character");
      }
    }
    if (!glyphs.emplace(static_cast<char32_t>(cp), std::move(bits)).second)
      throw AtlasFormatError("duplicate glyph " + std::to_string(cp));
  }

  GlyphBitmap fallback = box_glyph(gw, gh);
  if (auto it = glyphs.find(kReplacementChar); it != glyphs.end()) fallback = it->second;
  return GlyphAtlas(gw, gh, std::move(glyphs), std::move(fallback));
}

GlyphAtlas load_atlas_file(const std::filesystem::path& path, std::size_t patch_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read atlas file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_atlas(buf.str(), patch_size);
}

const GlyphAtlas& builtin_atlas() {
  static const GlyphAtlas atlas = parse_atlas(embedded::builtin_atlas_text, kDefaultPatchSize);
  return atlas;
}

GlyphAtlas load_atlas(const std::string& source, std::size_t patch_size) {
  if (source == "builtin") {
    if (patch_size != kDefaultPatchSize)
      throw AtlasGeometryError("built-in atlas is 8x16 and needs patch size 16");
    return builtin_atlas();
  }
  return load_atlas_file(source, patch_size);
}

}  // namespace pixeluq
