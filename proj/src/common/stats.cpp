#include "pixeluq/stats.hpp"

#include <algorithm>

#include "pixeluq/errors.hpp"

namespace pixeluq {

DistributionSummary summarize(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("no values to summarize");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  DistributionSummary s;
  s.count = n;
  s.min = values.front();
  s.max = values.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  return s;
}

}  // namespace pixeluq
