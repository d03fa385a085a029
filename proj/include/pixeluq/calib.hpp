#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pixeluq/stats.hpp"

namespace pixeluq {

struct CalibrationRecord {
  std::string example_id;
  std::string dataset;
  std::string language;  // ISO 639-3
  std::string script;
  double mask_ratio = 0.0;
  double sigma_bar = 0.0;
  double rmse = 0.0;
  std::optional<double> gnll;

  // Throws DomainError for negative sigma_bar/rmse or a ratio outside [0, 1].
  void validate() const;
  friend bool operator==(const CalibrationRecord&, const CalibrationRecord&) = default;
};

struct AxisRange {
  double min = 0.0;
  double max = 1.0;
};

struct HexBin {
  long row = 0;
  long col = 0;
  double cx = 0.0;
  double cy = 0.0;
  std::size_t count = 0;
};

struct HexbinResult {
  std::vector<HexBin> bins;  // non-empty bins ordered by (row, col)
  std::size_t in_range = 0;
  std::size_t dropped = 0;
};

// Pointy-top hexagonal binning of (sigma_bar, rmse). In lattice units
// u = (x - xmin) / dx and v = (y - ymin) / dy with dx = xwidth / grid_size and
// dy = ywidth / grid_size, centers sit at (col + row%2 / 2, row * sqrt(3)/2);
// each point goes to the nearest center (ties: lower row, then lower col).
// Points outside the closed ranges are dropped. Throws ConfigError for
// grid_size 0 or an empty or non-finite range.
HexbinResult hexbin_counts(const std::vector<CalibrationRecord>& records, AxisRange x_range, AxisRange y_range,
                           std::size_t grid_size);

// Pearson correlation of sigma_bar (x) and rmse (y). Throws
// DegenerateInputError for fewer than 2 records or zero variance.
double pearson_r(const std::vector<CalibrationRecord>& records);
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Fraction of records with rmse > scale * sigma_bar. Throws EmptyInputError for no records.
double underestimation_fraction(const std::vector<CalibrationRecord>& records, double scale = 1.0);

struct GroupSummary {
  std::string group;
  std::size_t count = 0;
  double mean_sigma = 0.0;
  double mean_rmse = 0.0;
  std::optional<double> mean_gnll;  // over records that carry a gnll value
  DistributionSummary sigma;        // quartiles of sigma_bar
};

// key is one of dataset, script, language, mask_ratio; groups are returned
// in lexicographic order. Throws ConfigError for other keys, EmptyInputError
// for no records.
std::vector<GroupSummary> group_summary(const std::vector<CalibrationRecord>& records, const std::string& key);

// RFC 4180 CSV with locale-independent shortest round-trip numbers.
void export_records_csv(const std::vector<CalibrationRecord>& records, const std::filesystem::path& path);
std::vector<CalibrationRecord> import_records_csv(const std::filesystem::path& path);
void export_hexbin_csv(const HexbinResult& result, const std::filesystem::path& path);
void export_summary_csv(const std::vector<GroupSummary>& summaries, const std::filesystem::path& path);

// Lower-level CSV helpers.
std::string csv_escape(const std::string& field);
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace pixeluq
