#pragma once

#include <cstddef>
#include <vector>

namespace pixeluq {

struct DistributionSummary {
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

// Quantiles by linear interpolation at position q*(n-1) of the sorted values.
// Throws EmptyInputError for no values.
DistributionSummary summarize(std::vector<double> values);

}  // namespace pixeluq
