#include <algorithm>
#include <cmath>
#include <map>

#include "pixeluq/calib.hpp"
#include "pixeluq/errors.hpp"

namespace pixeluq {

void CalibrationRecord::validate() const {
  if (!(sigma_bar >= 0.0)) throw DomainError("record " + example_id + ": sigma_bar must be non-negative");
  if (!(rmse >= 0.0)) throw DomainError("record " + example_id + ": rmse must be non-negative");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0)) throw DomainError("record " + example_id + ": mask_ratio outside [0, 1]");
}

HexbinResult hexbin_counts(const std::vector<CalibrationRecord>& records, AxisRange xr, AxisRange yr,
                           std::size_t grid_size) {
  if (grid_size < 1) throw ConfigError("grid_size must be at least 1");
  for (const AxisRange& r : {xr, yr})
    if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.max > r.min))
      throw ConfigError("hexbin range must be finite with max > min");
  const double dx = (xr.max - xr.min) / static_cast<double>(grid_size);
  const double dy = (yr.max - yr.min) / static_cast<double>(grid_size);
  const double h = std::sqrt(3.0) / 2.0;

  HexbinResult result;
  std::map<std::pair<long, long>, std::size_t> counts;
  for (const auto& rec : records) {
    const double x = rec.sigma_bar, y = rec.rmse;
    if (!(x >= xr.min && x <= xr.max && y >= yr.min && y <= yr.max)) {
      ++result.dropped;
      continue;
    }
    const double u = (x - xr.min) / dx, v = (y - yr.min) / dy;
    const long r0 = static_cast<long>(std::floor(v / h));
    long best_r = 0, best_c = 0;
    double best_d = INFINITY;
    for (long r = r0; r <= r0 + 1; ++r) {
      const double off = (r % 2 != 0) ? 0.5 : 0.0;
      const double base = std::floor(u - off);
      for (long c = static_cast<long>(base); c <= static_cast<long>(base) + 1; ++c) {
        const double du = u - (static_cast<double>(c) + off), dv = v - static_cast<double>(r) * h;
        const double d = du * du + dv * dv;
        if (d < best_d) {
          best_d = d;
          best_r = r;
          best_c = c;
        }
      }
    }
    ++counts[{best_r, best_c}];
    ++result.in_range;
  }
  for (const auto& [rc, n] : counts) {
    const auto [r, c] = rc;
    const double off = (r % 2 != 0) ? 0.5 : 0.0;
    result.bins.push_back({r, c, xr.min + (static_cast<double>(c) + off) * dx,
                           yr.min + static_cast<double>(r) * h * dy, n});
  }
  return result;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InputError("pearson_r: x and y differ in length");
  if (x.size() < 2) throw DegenerateInputError("pearson_r needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInputError("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double pearson_r(const std::vector<CalibrationRecord>& records) {
  std::vector<double> x, y;
  x.reserve(records.size());
  y.reserve(records.size());
  for (const auto& r : records) {
    x.push_back(r.sigma_bar);
    y.push_back(r.rmse);
  }
  return pearson_r(x, y);
}

double underestimation_fraction(const std::vector<CalibrationRecord>& records, double scale) {
  if (records.empty()) throw EmptyInputError("no calibration records");
  std::size_t above = 0;
  for (const auto& r : records) above += r.rmse > scale * r.sigma_bar ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(records.size());
}

std::vector<GroupSummary> group_summary(const std::vector<CalibrationRecord>& records, const std::string& key) {
  std::string (*pick)(const CalibrationRecord&) = nullptr;
  if (key == "dataset")
    pick = [](const CalibrationRecord& r) { return r.dataset; };
  else if (key == "script")
    pick = [](const CalibrationRecord& r) { return r.script; };
  else if (key == "language")
    pick = [](const CalibrationRecord& r) { return r.language; };
  else if (key == "mask_ratio")
    pick = [](const CalibrationRecord& r) { return format_double(r.mask_ratio); };
  else
    throw ConfigError("unknown group key '" + key + "' (expected dataset, script, language or mask_ratio)");
  if (records.empty()) throw EmptyInputError("no calibration records");

  std::map<std::string, std::vector<const CalibrationRecord*>> groups;
  for (const auto& r : records) groups[pick(r)].push_back(&r);
  std::vector<GroupSummary> out;
  for (const auto& [name, members] : groups) {
    GroupSummary s;
    s.group = name;
    s.count = members.size();
    std::vector<double> sigmas;
    double rmse_sum = 0.0, gnll_sum = 0.0;
    std::size_t gnll_n = 0;
    for (const auto* r : members) {
      sigmas.push_back(r->sigma_bar);
      rmse_sum += r->rmse;
      if (r->gnll) {
        gnll_sum += *r->gnll;
        ++gnll_n;
      }
    }
    s.sigma = summarize(sigmas);
    s.mean_sigma = s.sigma.mean;
    s.mean_rmse = rmse_sum / static_cast<double>(s.count);
    if (gnll_n > 0) s.mean_gnll = gnll_sum / static_cast<double>(gnll_n);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pixeluq
