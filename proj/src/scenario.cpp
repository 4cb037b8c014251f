#include "stlf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace stlf {

int DeviceDataset::labeled_count() const {
  int n = 0;
  for (const auto& l : labels)
    if (l.has_value()) ++n;
  return n;
}

DomainMode parse_domain_mode(const std::string& name) {
  if (name == "single") return DomainMode::kSingle;
  if (name == "mixed") return DomainMode::kMixed;
  if (name == "split") return DomainMode::kSplit;
  throw ConfigError("unknown domain mode: '" + name + "' (expected single|mixed|split)");
}

std::string to_string(DomainMode mode) {
  switch (mode) {
    case DomainMode::kSingle: return "single";
    case DomainMode::kMixed: return "mixed";
    case DomainMode::kSplit: return "split";
  }
  return "?";
}

namespace {

void validate_domain_config(const ScenarioConfig& c) {
  if (c.num_domains < 1) throw ConfigError("num_domains must be >= 1");
  if (c.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (c.feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (c.class_cov_scale <= 0.0) throw ConfigError("class_cov_scale must be positive");
}

}  // namespace

std::vector<DomainSpec> synthesize_domains(const ScenarioConfig& config, std::uint64_t rng_seed) {
  validate_domain_config(config);
  Rng rng(Rng::derive(rng_seed, 0xD0));

  // Class means are shared across domains; domains differ by shift/rotation.
  std::vector<Vec> means(config.num_classes);
  for (int c = 0; c < config.num_classes; ++c) {
    Vec m(config.feature_dim);
    for (int d = 0; d < config.feature_dim; ++d) m[d] = config.mean_scale * rng.normal();
    means[c] = m;
  }

  std::vector<DomainSpec> specs(config.num_domains);
  for (int k = 0; k < config.num_domains; ++k) {
    DomainSpec& spec = specs[k];
    spec.id = k;
    spec.class_means = means;
    spec.class_cov_scale = config.class_cov_scale;
    spec.shift = Vec::Zero(config.feature_dim);
    spec.rotation_angle = 0.0;
    if (config.mode == DomainMode::kSplit && k > 0) {
      // Axis-aligned translations: any two of k*s*e_{k mod dim} are at least
      // shift_scale apart.
      spec.shift[k % config.feature_dim] = config.shift_scale * k;
      spec.rotation_angle = config.rotation_step * k;
    } else if (config.mode == DomainMode::kMixed && k > 0) {
      spec.shift[k % config.feature_dim] = 0.5 * config.shift_scale * k;
      spec.rotation_angle = 0.5 * config.rotation_step * k;
    }
    int subset = config.domain_label_subset;
    if (subset <= 0 || subset >= config.num_classes) {
      for (int c = 0; c < config.num_classes; ++c) spec.label_subset.push_back(c);
    } else {
      for (int c = 0; c < subset; ++c) spec.label_subset.push_back((k + c) % config.num_classes);
      std::sort(spec.label_subset.begin(), spec.label_subset.end());
    }
  }
  return specs;
}

namespace {

Vec sample_point(const DomainSpec& spec, int cls, int feature_dim, Rng& rng) {
  Vec x(feature_dim);
  const Vec& mean = spec.class_means[cls];
  for (int d = 0; d < feature_dim; ++d) x[d] = mean[d] + spec.class_cov_scale * rng.normal();
  if (spec.rotation_angle != 0.0 && feature_dim >= 2) {
    const double c = std::cos(spec.rotation_angle), s = std::sin(spec.rotation_angle);
    const double x0 = x[0], x1 = x[1];
    x[0] = c * x0 - s * x1;
    x[1] = s * x0 + c * x1;
  }
  return x + spec.shift;
}

}  // namespace

Scenario partition(const std::vector<DomainSpec>& domains, const ScenarioConfig& config,
                   std::uint64_t rng_seed) {
  if (domains.empty()) throw ConfigError("partition requires at least one domain");
  if (config.num_devices < 1) throw ConfigError("num_devices must be >= 1");
  if (config.samples_per_device < 1) throw ConfigError("samples_per_device must be >= 1");
  if (config.dirichlet_beta <= 0.0) throw ConfigError("dirichlet_beta must be positive");
  const auto [frac_lo, frac_hi] = config.labeled_fraction_range;
  if (!(frac_lo > 0.0 && frac_lo <= frac_hi && frac_hi <= 1.0))
    throw ConfigError("labeled_fraction_range must lie within (0, 1]");

  const int num_domains = static_cast<int>(domains.size());
  Scenario scenario;
  scenario.seed = rng_seed;
  scenario.num_devices = config.num_devices;
  scenario.devices.resize(config.num_devices);
  scenario.eval_labels.resize(config.num_devices);

  const int labeled_devices = (config.num_devices + 1) / 2;

  for (int dev = 0; dev < config.num_devices; ++dev) {
    Rng rng(Rng::derive(rng_seed, 0xDA7A, static_cast<std::uint64_t>(dev)));
    const int home = dev % num_domains;
    const DomainSpec& home_spec = domains[home];

    const auto& subset = home_spec.label_subset;
    const Vec proportions = rng.dirichlet(config.dirichlet_beta, static_cast<int>(subset.size()));

    const int n = config.samples_per_device;
    DeviceDataset& ds = scenario.devices[dev];
    ds.domain_id = home;
    ds.features.resize(n, config.feature_dim);
    ds.labels.assign(n, std::nullopt);
    scenario.eval_labels[dev].resize(n);

    for (int s = 0; s < n; ++s) {
      // Class from the device's Dirichlet mixture over its home label subset.
      const double u = rng.uniform();
      double acc = 0.0;
      int ci = static_cast<int>(subset.size()) - 1;
      for (int c = 0; c < static_cast<int>(subset.size()); ++c) {
        acc += proportions[c];
        if (u < acc) {
          ci = c;
          break;
        }
      }
      const int cls = subset[ci];
      const DomainSpec& spec =
          (config.mode == DomainMode::kMixed) ? domains[rng.uniform_int(num_domains)] : home_spec;
      ds.features.row(s) = sample_point(spec, cls, config.feature_dim, rng).transpose();
      scenario.eval_labels[dev][s] = cls;
    }

    if (dev < labeled_devices) {
      const double frac = rng.uniform(frac_lo, frac_hi);
      const int labeled = std::max(1, static_cast<int>(std::lround(frac * n)));
      const std::vector<int> order = rng.permutation(n);
      for (int k = 0; k < labeled; ++k) ds.labels[order[k]] = scenario.eval_labels[dev][order[k]];
    }
  }

  // Communication profile.
  Rng comm_rng(Rng::derive(rng_seed, 0xC0AA));
  CommProfile& comm = scenario.comm;
  comm.model_bits = config.model_bits;
  comm.tx_power_dbm.resize(config.num_devices);
  for (int i = 0; i < config.num_devices; ++i)
    comm.tx_power_dbm[i] =
        comm_rng.uniform(config.tx_power_range_dbm.first, config.tx_power_range_dbm.second);
  comm.rate_bps = Mat::Zero(config.num_devices, config.num_devices);
  for (int i = 0; i < config.num_devices; ++i)
    for (int j = 0; j < config.num_devices; ++j)
      if (i != j)
        comm.rate_bps(i, j) =
            comm_rng.uniform(config.rate_range_bps.first, config.rate_range_bps.second);

  return scenario;
}

double energy_constant(const CommProfile& comm, int i, int j) {
  const int n = static_cast<int>(comm.tx_power_dbm.size());
  if (i == j) throw DomainError("energy_constant: i and j must differ");
  if (i < 0 || j < 0 || i >= n || j >= n) throw DomainError("energy_constant: device index out of range");
  const double watts = std::pow(10.0, (comm.tx_power_dbm[i] - 30.0) / 10.0);
  return static_cast<double>(comm.model_bits) / comm.rate_bps(i, j) * watts;
}

Mat energy_matrix(const CommProfile& comm) {
  const int n = static_cast<int>(comm.tx_power_dbm.size());
  Mat k = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) k(i, j) = energy_constant(comm, i, j);
  return k;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
  unsigned char buf[4];
  if (!f.read(reinterpret_cast<char*>(buf), 4)) throw FormatError("truncated IDX file: " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

DeviceDataset load_idx(const std::string& path_images, const std::string& path_labels) {
  std::ifstream fi(path_images, std::ios::binary);
  if (!fi) throw FormatError("cannot open IDX image file: " + path_images);
  std::ifstream fl(path_labels, std::ios::binary);
  if (!fl) throw FormatError("cannot open IDX label file: " + path_labels);

  if (read_be32(fi, path_images) != 0x00000803u)
    throw FormatError("bad IDX image magic in " + path_images);
  const std::uint32_t count = read_be32(fi, path_images);
  const std::uint32_t rows = read_be32(fi, path_images);
  const std::uint32_t cols = read_be32(fi, path_images);

  if (read_be32(fl, path_labels) != 0x00000801u)
    throw FormatError("bad IDX label magic in " + path_labels);
  if (read_be32(fl, path_labels) != count)
    throw FormatError("IDX image/label count mismatch between " + path_images + " and " +
                      path_labels);

  const std::size_t dim = std::size_t(rows) * cols;
  DeviceDataset ds;
  ds.features.resize(count, static_cast<Eigen::Index>(dim));
  ds.labels.resize(count);

  std::vector<unsigned char> pixel(dim);
  for (std::uint32_t s = 0; s < count; ++s) {
    if (!fi.read(reinterpret_cast<char*>(pixel.data()), static_cast<std::streamsize>(dim)))
      throw FormatError("truncated IDX image data: " + path_images);
    for (std::size_t d = 0; d < dim; ++d)
      ds.features(s, static_cast<Eigen::Index>(d)) = pixel[d] / 255.0;
    char lab = 0;
    if (!fl.read(&lab, 1)) throw FormatError("truncated IDX label data: " + path_labels);
    ds.labels[s] = static_cast<int>(static_cast<unsigned char>(lab));
  }
  return ds;
}

}  // namespace stlf
