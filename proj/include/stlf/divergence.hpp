#pragma once

#include <cstdint>
#include <vector>

#include "stlf/common.hpp"
#include "stlf/hypothesis.hpp"
#include "stlf/scenario.hpp"

namespace stlf {

struct DivergenceConfig {
  int local_iters = 40;   // SGD steps per device per aggregation round
  int rounds = 5;         // parameter-averaging rounds
  TrainConfig train;      // learning rate / batch size / base seed
  double holdout_fraction = 0.2;
  int hidden_dim = 0;     // domain-classifier hidden width
};

enum class DivergenceScale { kRaw02, kNormalized01 };

struct DivergenceMatrix {
  Mat values;
  DivergenceScale scale = DivergenceScale::kRaw02;

  int size() const { return static_cast<int>(values.rows()); }
  Mat raw() const { return scale == DivergenceScale::kRaw02 ? values : Mat(2.0 * values); }
  Mat normalized() const {
    return scale == DivergenceScale::kNormalized01 ? values : Mat(0.5 * values);
  }
};

// Proxy-A-distance map from a domain separator's balanced error. The
// min(err, 1-err) clamp keeps the estimate inside [0, 2].
inline double divergence_from_error(double err) {
  const double e = std::min(err, 1.0 - err);
  return 2.0 * (1.0 - 2.0 * e);
}

// Message log of one pairwise protocol run. Only parameter vectors and scalar
// errors ever cross the device boundary; tests audit this.
struct PairTranscript {
  enum class Kind { kParams, kScalar };
  struct Message {
    Kind kind;
    int payload_size;
  };
  std::vector<Message> messages;
};

// One pairwise divergence estimate: both devices relabel their data by
// origin, run `rounds` of local training + parameter averaging, then score
// the final separator's balanced error on local holdouts. Raw scale [0, 2].
double estimate_pair(const DeviceDataset& a, const DeviceDataset& b, const DivergenceConfig& cfg,
                     PairTranscript* transcript = nullptr);

// All unordered pairs; per-pair RNG streams derive from (seed, i, j) so the
// result is independent of evaluation order. Raw scale.
DivergenceMatrix estimate_all(const Scenario& scenario, const DivergenceConfig& cfg);

// Wraps a hand-specified matrix (regime experiments) after validating
// symmetry, zero diagonal, and the scale's range.
DivergenceMatrix inject(const Mat& matrix, DivergenceScale scale);

}  // namespace stlf
