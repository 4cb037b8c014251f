#pragma once

#include <cstdint>
#include <vector>

#include "stlf/common.hpp"
#include "stlf/scenario.hpp"

namespace stlf {

// Architecture descriptor. hidden_dim == 0 is a linear softmax classifier,
// otherwise a single tanh hidden layer is used.
struct Arch {
  int input_dim = 0;
  int hidden_dim = 0;
  int output_dim = 0;

  int param_count() const {
    if (hidden_dim == 0) return output_dim * (input_dim + 1);
    return hidden_dim * (input_dim + 1) + output_dim * (hidden_dim + 1);
  }
  friend bool operator==(const Arch& a, const Arch& b) {
    return a.input_dim == b.input_dim && a.hidden_dim == b.hidden_dim &&
           a.output_dim == b.output_dim;
  }
};

struct Hypothesis {
  Arch arch;
  Vec params;

  static Hypothesis zeros(const Arch& arch) { return {arch, Vec::Zero(arch.param_count())}; }
  static Hypothesis random_init(const Arch& arch, std::uint64_t seed, double scale = 0.1);

  Vec logits(const Eigen::Ref<const Vec>& x) const;
  Vec softmax(const Eigen::Ref<const Vec>& x) const;
  int predict(const Eigen::Ref<const Vec>& x) const;
};

struct TrainConfig {
  int iterations = 100;
  int batch_size = 10;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// Mini-batch SGD on cross-entropy over the labeled samples only.
Hypothesis train(const Hypothesis& init, const DeviceDataset& data, const TrainConfig& cfg);

// (misclassified labeled + unlabeled) / total. Unlabeled samples count as
// full errors since their ground truth is unknown to the device.
double empirical_error(const Hypothesis& h, const DeviceDataset& data);

// Fraction of samples on which the two hypotheses' argmax predictions differ.
double divergence_error(const Hypothesis& h1, const Hypothesis& h2, const DeviceDataset& data);

// Parameter-space weighted average. Weights must be nonnegative and sum to 1.
Hypothesis combine(const std::vector<Hypothesis>& hs, const Vec& weights);

double accuracy(const Hypothesis& h, const DeviceDataset& data,
                const std::vector<int>& ground_truth);

// Output-averaging alternative to parameter combination: prediction is the
// argmax of the weighted mean of member softmax outputs.
int predict_output_average(const std::vector<Hypothesis>& hs, const Vec& weights,
                           const Eigen::Ref<const Vec>& x);
double accuracy_output_average(const std::vector<Hypothesis>& hs, const Vec& weights,
                               const DeviceDataset& data, const std::vector<int>& ground_truth);

// Mean cross-entropy and its gradient over (X, y); exposed so the analytic
// gradient can be checked against finite differences.
std::pair<double, Vec> ce_loss_and_grad(const Hypothesis& h, const Mat& X,
                                        const std::vector<int>& y);

}  // namespace stlf
