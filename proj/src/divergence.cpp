#include "stlf/divergence.hpp"

#include <algorithm>
#include <cmath>

namespace stlf {

namespace {

// Device-local view used by the pairwise protocol. The outer loop only ever
// touches parameter vectors and scalar errors through this interface.
class ProtocolDevice {
 public:
  ProtocolDevice(const DeviceDataset& data, int domain_label, double holdout_fraction,
                 std::uint64_t seed)
      : label_(domain_label) {
    const int n = data.size();
    const int holdout = static_cast<int>(std::lround(holdout_fraction * n));
    if (holdout < 1 || holdout >= n)
      throw ProtocolError("estimate_pair: holdout split is empty on one side");
    Rng rng(Rng::derive(seed, 0x401d0));
    const std::vector<int> order = rng.permutation(n);

    train_.features.resize(n - holdout, data.features.cols());
    train_.labels.assign(n - holdout, std::nullopt);
    held_.resize(holdout, data.features.cols());
    for (int k = 0; k < n - holdout; ++k) {
      train_.features.row(k) = data.features.row(order[k]);
      train_.labels[k] = domain_label;
    }
    for (int k = 0; k < holdout; ++k) held_.row(k) = data.features.row(order[n - holdout + k]);
  }

  Vec train_local(const Vec& params, const Arch& arch, const TrainConfig& cfg) const {
    return train({arch, params}, train_, cfg).params;
  }

  double holdout_error(const Vec& params, const Arch& arch) const {
    const Hypothesis h{arch, params};
    int wrong = 0;
    for (Eigen::Index s = 0; s < held_.rows(); ++s)
      if (h.predict(held_.row(s).transpose()) != label_) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(held_.rows());
  }

 private:
  int label_;
  DeviceDataset train_;
  Mat held_;
};

void log_params(PairTranscript* t, const Vec& p) {
  if (t) t->messages.push_back({PairTranscript::Kind::kParams, static_cast<int>(p.size())});
}

void log_scalar(PairTranscript* t) {
  if (t) t->messages.push_back({PairTranscript::Kind::kScalar, 1});
}

}  // namespace

double estimate_pair(const DeviceDataset& a, const DeviceDataset& b, const DivergenceConfig& cfg,
                     PairTranscript* transcript) {
  if (a.size() == 0 || b.size() == 0) throw DomainError("estimate_pair: empty dataset");
  if (a.features.cols() != b.features.cols())
    throw DomainError("estimate_pair: feature dimension mismatch");
  if (cfg.rounds < 1 || cfg.local_iters < 1)
    throw ConfigError("estimate_pair: rounds and local_iters must be >= 1");

  const Arch arch{static_cast<int>(a.features.cols()), cfg.hidden_dim, 2};
  const ProtocolDevice dev_a(a, 0, cfg.holdout_fraction, Rng::derive(cfg.train.seed, 0xA));
  const ProtocolDevice dev_b(b, 1, cfg.holdout_fraction, Rng::derive(cfg.train.seed, 0xB));

  TrainConfig local = cfg.train;
  local.iterations = cfg.local_iters;

  Vec shared = Hypothesis::random_init(arch, Rng::derive(cfg.train.seed, 0x1417)).params;
  for (int round = 0; round < cfg.rounds; ++round) {
    TrainConfig la = local;
    la.seed = Rng::derive(cfg.train.seed, 0xAA, static_cast<std::uint64_t>(round));
    TrainConfig lb = local;
    lb.seed = Rng::derive(cfg.train.seed, 0xBB, static_cast<std::uint64_t>(round));
    const Vec pa = dev_a.train_local(shared, arch, la);
    const Vec pb = dev_b.train_local(shared, arch, lb);
    log_params(transcript, pa);
    log_params(transcript, pb);
    shared = 0.5 * (pa + pb);
  }

  const double err_a = dev_a.holdout_error(shared, arch);
  const double err_b = dev_b.holdout_error(shared, arch);
  log_scalar(transcript);
  log_scalar(transcript);

  // Balanced error so unequal dataset sizes do not bias the estimate.
  const double err = 0.5 * (err_a + err_b);
  return divergence_from_error(err);
}

DivergenceMatrix estimate_all(const Scenario& scenario, const DivergenceConfig& cfg) {
  const int n = scenario.num_devices;
  if (n < 2) throw DomainError("estimate_all: need at least two devices");

  DivergenceMatrix out;
  out.scale = DivergenceScale::kRaw02;
  out.values = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      DivergenceConfig pair_cfg = cfg;
      pair_cfg.train.seed = Rng::derive(cfg.train.seed, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(j));
      const double d = estimate_pair(scenario.devices[i], scenario.devices[j], pair_cfg);
      out.values(i, j) = d;
      out.values(j, i) = d;
    }
  }
  return out;
}

DivergenceMatrix inject(const Mat& matrix, DivergenceScale scale) {
  if (matrix.rows() != matrix.cols()) throw DomainError("inject: matrix must be square");
  const double hi = scale == DivergenceScale::kRaw02 ? 2.0 : 1.0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (std::abs(matrix(i, j) - matrix(j, i)) > 1e-12)
        throw DomainError("inject: matrix not symmetric");
      if (matrix(i, j) < 0.0 || matrix(i, j) > hi)
        throw DomainError("inject: entry outside divergence scale range");
    }
    if (matrix(i, i) != 0.0) throw DomainError("inject: diagonal must be zero");
  }
  return {matrix, scale};
}

}  // namespace stlf
