#include <algorithm>
#include <cmath>

#include "pixeluq/errors.hpp"
#include "pixeluq/random.hpp"
#include "pixeluq/vitmae.hpp"

namespace pixeluq {

PatchMask PatchMask::none(std::size_t num_patches) { return from_flags(std::vector<std::uint8_t>(num_patches, 0)); }

PatchMask PatchMask::from_flags(std::vector<std::uint8_t> flags) {
  PatchMask m;
  for (auto& f : flags) f = f ? 1 : 0;
  m.flags = std::move(flags);
  m.realized_ratio = m.flags.empty() ? 0.0 : static_cast<double>(m.masked_count()) / static_cast<double>(m.size());
  return m;
}

std::size_t PatchMask::masked_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
}

// Span placement:
//  1. u ~ U[0,1); the span length is S[i] for the first i with u < W[i].
//  2. A start is drawn uniformly among unmasked patches and shifted left so
//     the span fits inside the sequence; spans may run into already-masked
//     patches, only newly covered patches count.
//  3. A span that would overshoot round(R*N) is kept with probability
//     (remaining budget / newly covered), after which sampling stops, so the
//     expected masked count equals the target exactly.
//  4. At most 10*N draws.
PatchMask sample_span_mask(std::size_t num_patches, const MaskSpec& spec, std::uint64_t rng_seed) {
  spec.validate();
  if (num_patches < 1) throw ConfigError("num_patches must be at least 1");
  const std::size_t N = num_patches;
  const auto target = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(N)));

  Rng rng(mix_seed(spec.seed, rng_seed));
  PatchMask mask;
  mask.flags.assign(N, 0);
  std::size_t count = 0;
  for (std::size_t attempt = 0; count < target && attempt < 10 * N; ++attempt) {
    const double u = rng.uniform();
    std::size_t pick = 0;
    while (pick + 1 < spec.span_weights.size() && !(u < spec.span_weights[pick])) ++pick;
    const std::size_t length = std::min(spec.span_lengths[pick], N);

    std::size_t k = rng.below(N - count);
    std::size_t pos = 0;
    for (;; ++pos) {
      if (!mask.flags[pos]) {
        if (k == 0) break;
        --k;
      }
    }
    const std::size_t start = std::min(pos, N - length);
    std::size_t fresh = 0;
    for (std::size_t i = start; i < start + length; ++i) fresh += mask.flags[i] ? 0 : 1;

    bool last = false;
    if (count + fresh > target) {
      const double keep = static_cast<double>(target - count) / static_cast<double>(fresh);
      last = true;
      if (!(rng.uniform() < keep)) break;
    }
    for (std::size_t i = start; i < start + length; ++i) mask.flags[i] = 1;
    count += fresh;
    mask.spans.push_back({start, length});
    if (last) break;
  }
  mask.realized_ratio = static_cast<double>(count) / static_cast<double>(N);
  return mask;
}

}  // namespace pixeluq
