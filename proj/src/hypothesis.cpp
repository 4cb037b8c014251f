#include "stlf/hypothesis.hpp"

#include <algorithm>
#include <cmath>

namespace stlf {

namespace {

Vec softmax_of(Vec z) {
  const double m = z.maxCoeff();
  z = (z.array() - m).exp().matrix();
  return z / z.sum();
}

int argmax(const Vec& v) {
  Eigen::Index i = 0;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

// Parameter layout: linear = [W (out x in), b]; one hidden layer =
// [W1 (hid x in), b1, W2 (out x hid), b2]; matrix blocks are column-major.
struct View {
  const Arch& arch;
  const Vec& p;

  Eigen::Map<const Mat> w1() const {
    return {p.data(), arch.hidden_dim, arch.input_dim};
  }
  Eigen::Map<const Vec> b1() const {
    return {p.data() + arch.hidden_dim * arch.input_dim, arch.hidden_dim};
  }
  Eigen::Map<const Mat> w2() const {
    const int off = arch.hidden_dim * (arch.input_dim + 1);
    return {p.data() + off, arch.output_dim, arch.hidden_dim};
  }
  Eigen::Map<const Vec> b2() const {
    const int off = arch.hidden_dim * (arch.input_dim + 1) + arch.output_dim * arch.hidden_dim;
    return {p.data() + off, arch.output_dim};
  }
  Eigen::Map<const Mat> w() const { return {p.data(), arch.output_dim, arch.input_dim}; }
  Eigen::Map<const Vec> b() const {
    return {p.data() + arch.output_dim * arch.input_dim, arch.output_dim};
  }
};

void check_params(const Hypothesis& h, const char* where) {
  if (h.params.size() != h.arch.param_count())
    throw DomainError(std::string(where) + ": params length does not match arch");
}

}  // namespace

Hypothesis Hypothesis::random_init(const Arch& arch, std::uint64_t seed, double scale) {
  Rng rng(Rng::derive(seed, 0x1417));
  Vec p(arch.param_count());
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = scale * rng.normal();
  return {arch, p};
}

Vec Hypothesis::logits(const Eigen::Ref<const Vec>& x) const {
  check_params(*this, "logits");
  View v{arch, params};
  if (arch.hidden_dim == 0) return v.w() * x + v.b();
  const Vec a = (v.w1() * x + v.b1()).array().tanh().matrix();
  return v.w2() * a + v.b2();
}

Vec Hypothesis::softmax(const Eigen::Ref<const Vec>& x) const { return softmax_of(logits(x)); }

int Hypothesis::predict(const Eigen::Ref<const Vec>& x) const { return argmax(logits(x)); }

std::pair<double, Vec> ce_loss_and_grad(const Hypothesis& h, const Mat& X,
                                        const std::vector<int>& y) {
  check_params(h, "ce_loss_and_grad");
  const Arch& arch = h.arch;
  const int n = static_cast<int>(X.rows());
  if (n == 0 || static_cast<int>(y.size()) != n)
    throw DomainError("ce_loss_and_grad: batch size mismatch");

  View v{arch, h.params};
  Vec grad = Vec::Zero(h.params.size());
  double loss = 0.0;

  if (arch.hidden_dim == 0) {
    Eigen::Map<Mat> gw(grad.data(), arch.output_dim, arch.input_dim);
    Eigen::Map<Vec> gb(grad.data() + arch.output_dim * arch.input_dim, arch.output_dim);
    for (int s = 0; s < n; ++s) {
      const Vec x = X.row(s).transpose();
      const Vec p = softmax_of(v.w() * x + v.b());
      loss -= std::log(std::max(p[y[s]], 1e-300));
      Vec delta = p;
      delta[y[s]] -= 1.0;
      gw.noalias() += delta * x.transpose();
      gb += delta;
    }
  } else {
    const int off1 = arch.hidden_dim * arch.input_dim;
    const int off2 = arch.hidden_dim * (arch.input_dim + 1);
    const int off3 = off2 + arch.output_dim * arch.hidden_dim;
    Eigen::Map<Mat> gw1(grad.data(), arch.hidden_dim, arch.input_dim);
    Eigen::Map<Vec> gb1(grad.data() + off1, arch.hidden_dim);
    Eigen::Map<Mat> gw2(grad.data() + off2, arch.output_dim, arch.hidden_dim);
    Eigen::Map<Vec> gb2(grad.data() + off3, arch.output_dim);
    for (int s = 0; s < n; ++s) {
      const Vec x = X.row(s).transpose();
      const Vec a = (v.w1() * x + v.b1()).array().tanh().matrix();
      const Vec p = softmax_of(v.w2() * a + v.b2());
      loss -= std::log(std::max(p[y[s]], 1e-300));
      Vec delta = p;
      delta[y[s]] -= 1.0;
      gw2.noalias() += delta * a.transpose();
      gb2 += delta;
      const Vec da = ((v.w2().transpose() * delta).array() * (1.0 - a.array().square())).matrix();
      gw1.noalias() += da * x.transpose();
      gb1 += da;
    }
  }
  return {loss / n, grad / n};
}

Hypothesis train(const Hypothesis& init, const DeviceDataset& data, const TrainConfig& cfg) {
  check_params(init, "train");
  if (cfg.iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.learning_rate < 0.0) throw ConfigError("train: learning_rate must be nonnegative");
  if (init.arch.input_dim != data.features.cols())
    throw DomainError("train: input_dim does not match feature dimension");

  std::vector<int> labeled;
  for (int s = 0; s < data.size(); ++s)
    if (data.labels[s].has_value()) {
      if (*data.labels[s] < 0 || *data.labels[s] >= init.arch.output_dim)
        throw DomainError("train: label outside arch output range");
      labeled.push_back(s);
    }
  if (labeled.empty()) throw TrainingError("train: dataset has no labeled samples");

  Rng rng(Rng::derive(cfg.seed, 0x5D9));
  Hypothesis h = init;
  const int bs = std::min<int>(cfg.batch_size, static_cast<int>(labeled.size()));
  Mat bx(bs, data.features.cols());
  std::vector<int> by(bs);
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int k = 0; k < bs; ++k) {
      const int s = labeled[rng.uniform_int(static_cast<int>(labeled.size()))];
      bx.row(k) = data.features.row(s);
      by[k] = *data.labels[s];
    }
    const auto [loss, grad] = ce_loss_and_grad(h, bx, by);
    (void)loss;
    h.params -= cfg.learning_rate * grad;
  }
  return h;
}

double empirical_error(const Hypothesis& h, const DeviceDataset& data) {
  if (data.size() == 0) throw DomainError("empirical_error: empty dataset");
  int errors = 0;
  for (int s = 0; s < data.size(); ++s) {
    if (!data.labels[s].has_value())
      ++errors;
    else if (h.predict(data.features.row(s).transpose()) != *data.labels[s])
      ++errors;
  }
  return static_cast<double>(errors) / data.size();
}

double divergence_error(const Hypothesis& h1, const Hypothesis& h2, const DeviceDataset& data) {
  if (!(h1.arch == h2.arch)) throw DomainError("divergence_error: arch mismatch");
  if (data.size() == 0) throw DomainError("divergence_error: empty dataset");
  int disagree = 0;
  for (int s = 0; s < data.size(); ++s) {
    const Vec x = data.features.row(s).transpose();
    if (h1.predict(x) != h2.predict(x)) ++disagree;
  }
  return static_cast<double>(disagree) / data.size();
}

Hypothesis combine(const std::vector<Hypothesis>& hs, const Vec& weights) {
  if (hs.empty()) throw DomainError("combine: no hypotheses");
  if (static_cast<int>(hs.size()) != weights.size())
    throw DomainError("combine: weight count mismatch");
  if (weights.minCoeff() < -1e-12) throw DomainError("combine: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw DomainError("combine: weights must sum to 1 within 1e-9");
  for (const auto& h : hs) {
    check_params(h, "combine");
    if (!(h.arch == hs.front().arch)) throw DomainError("combine: arch mismatch");
  }
  Hypothesis out = Hypothesis::zeros(hs.front().arch);
  for (std::size_t k = 0; k < hs.size(); ++k) out.params += weights[static_cast<int>(k)] * hs[k].params;
  return out;
}

double accuracy(const Hypothesis& h, const DeviceDataset& data,
                const std::vector<int>& ground_truth) {
  if (data.size() == 0) throw DomainError("accuracy: empty dataset");
  if (static_cast<int>(ground_truth.size()) != data.size())
    throw DomainError("accuracy: ground truth length mismatch");
  int correct = 0;
  for (int s = 0; s < data.size(); ++s)
    if (h.predict(data.features.row(s).transpose()) == ground_truth[s]) ++correct;
  return static_cast<double>(correct) / data.size();
}

int predict_output_average(const std::vector<Hypothesis>& hs, const Vec& weights,
                           const Eigen::Ref<const Vec>& x) {
  if (hs.empty()) throw DomainError("predict_output_average: no hypotheses");
  Vec p = Vec::Zero(hs.front().arch.output_dim);
  for (std::size_t k = 0; k < hs.size(); ++k)
    p += weights[static_cast<int>(k)] * hs[k].softmax(x);
  Eigen::Index i = 0;
  p.maxCoeff(&i);
  return static_cast<int>(i);
}

double accuracy_output_average(const std::vector<Hypothesis>& hs, const Vec& weights,
                               const DeviceDataset& data, const std::vector<int>& ground_truth) {
  if (data.size() == 0) throw DomainError("accuracy_output_average: empty dataset");
  if (static_cast<int>(ground_truth.size()) != data.size())
    throw DomainError("accuracy_output_average: ground truth length mismatch");
  int correct = 0;
  for (int s = 0; s < data.size(); ++s)
    if (predict_output_average(hs, weights, data.features.row(s).transpose()) == ground_truth[s])
      ++correct;
  return static_cast<double>(correct) / data.size();
}

}  // namespace stlf
