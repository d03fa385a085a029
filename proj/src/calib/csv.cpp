#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pixeluq/calib.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {
namespace {

const char* const kRecordHeader = "example_id,dataset,language,script,mask_ratio,sigma_bar,rmse,gnll";

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string row(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line += ',';
    first = false;
    line += csv_escape(f);
  }
  return line + "\r\n";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, field_started = false;
  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(fields));
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !fields.empty()) end_row();
  return rows;
}

void export_records_csv(const std::vector<CalibrationRecord>& records, const std::filesystem::path& path) {
  std::string text = std::string(kRecordHeader) + "\r\n";
  for (const auto& r : records)
    text += row({r.example_id, r.dataset, r.language, r.script, format_double(r.mask_ratio),
                 format_double(r.sigma_bar), format_double(r.rmse), r.gnll ? format_double(*r.gnll) : ""});
  write_text(path, text);
}

std::vector<CalibrationRecord> import_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_csv(ss.str());
  if (rows.empty()) throw FormatError(path.string() + ": missing CSV header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kRecordHeader) throw FormatError(path.string() + ": unexpected header '" + header + "'");
  std::vector<CalibrationRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 8) throw FormatError(where + ": expected 8 fields, got " + std::to_string(f.size()));
    CalibrationRecord r;
    try {
      r.example_id = f[0];
      r.dataset = f[1];
      r.language = f[2];
      r.script = f[3];
      r.mask_ratio = parse_double(f[4]);
      r.sigma_bar = parse_double(f[5]);
      r.rmse = parse_double(f[6]);
      if (!f[7].empty()) r.gnll = parse_double(f[7]);
      r.validate();
    } catch (const Error& e) {
      throw FormatError(where + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

void export_hexbin_csv(const HexbinResult& result, const std::filesystem::path& path) {
  std::string text = "cx,cy,count\r\n";
  for (const auto& b : result.bins) text += row({format_double(b.cx), format_double(b.cy), std::to_string(b.count)});
  write_text(path, text);
}

void export_summary_csv(const std::vector<GroupSummary>& summaries, const std::filesystem::path& path) {
  std::string text = "group,count,mean_sigma,mean_rmse,mean_gnll,q1,q2,q3\r\n";
  for (const auto& s : summaries)
    text += row({s.group, std::to_string(s.count), format_double(s.mean_sigma), format_double(s.mean_rmse),
                 s.mean_gnll ? format_double(*s.mean_gnll) : "", format_double(s.sigma.q1),
                 format_double(s.sigma.median), format_double(s.sigma.q3)});
  write_text(path, text);
}

}  // namespace pixeluq
