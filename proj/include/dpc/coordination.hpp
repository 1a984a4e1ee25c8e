#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dpc/distribution.hpp"
#include "dpc/errors.hpp"

namespace dpc {

/// Round-trip time per pairwise exchange, drawn uniformly in mean +/- jitter.
struct LatencyModel {
  double mean_ms = 10.0;
  double jitter_ms = 2.0;
};

struct CommConfig {
  double d_comm = std::numeric_limits<double>::infinity();
  std::optional<LatencyModel> latency;
};

inline void validate(const CommConfig& cfg) {
  if (!(cfg.d_comm > 0.0)) throw InputError("communication range must be positive or infinite");
  if (cfg.latency && (!(cfg.latency->mean_ms >= 0.0) || !(cfg.latency->jitter_ms >= 0.0) ||
                      cfg.latency->jitter_ms > cfg.latency->mean_ms)) {
    throw InputError("latency model needs 0 <= jitter <= mean");
  }
}

/// In-place elementwise min of two weight vectors.
inline void share_weights_inplace(WeightVector& a, WeightVector& b) {
  if (a.size() != b.size()) throw InputError("share_weights: length mismatch");
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double m = std::min(a[j], b[j]);
    a[j] = m;
    b[j] = m;
  }
}

inline std::pair<WeightVector, WeightVector> share_weights(WeightVector a, WeightVector b) {
  share_weights_inplace(a, b);
  return {std::move(a), std::move(b)};
}

struct SyncResult {
  std::size_t exchanges = 0;
  double simulated_overhead_ms = 0.0;
};

/**
 * One weight-sharing round. Every unordered pair (r, s), r < s, whose outputs
 * are within d_comm exchanges weights, processed in ascending (r, s) order.
 * The latency model only feeds the overhead figure.
 */
inline SyncResult sync_round(std::vector<WeightVector>& weights, const std::vector<Point>& positions,
                             const CommConfig& cfg, std::uint64_t seed = 0) {
  if (weights.size() != positions.size()) throw InputError("sync_round: one position per agent required");
  SyncResult res;
  std::optional<detail::Sampler> rng;
  if (cfg.latency) rng.emplace(seed);
  for (std::size_t r = 0; r < weights.size(); ++r) {
    for (std::size_t s = r + 1; s < weights.size(); ++s) {
      if ((positions[r] - positions[s]).norm() > cfg.d_comm) continue;
      share_weights_inplace(weights[r], weights[s]);
      ++res.exchanges;
      if (rng) {
        res.simulated_overhead_ms +=
            cfg.latency->mean_ms + cfg.latency->jitter_ms * (2.0 * rng->uniform() - 1.0);
      }
    }
  }
  return res;
}

}  // namespace dpc
