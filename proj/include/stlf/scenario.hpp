#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stlf/common.hpp"

namespace stlf {

// One synthetic data domain: Gaussian class blobs, optionally translated and
// rotated relative to the base domain.
struct DomainSpec {
  int id = 0;
  std::vector<Vec> class_means;
  double class_cov_scale = 1.0;
  Vec shift;
  double rotation_angle = 0.0;
  std::vector<int> label_subset;
};

struct DeviceDataset {
  Mat features;  // samples x feature_dim
  std::vector<std::optional<int>> labels;
  int domain_id = 0;

  int size() const { return static_cast<int>(features.rows()); }
  int labeled_count() const;
  int unlabeled_count() const { return size() - labeled_count(); }
};

struct CommProfile {
  Vec tx_power_dbm;      // per device
  Mat rate_bps;          // per ordered pair, diagonal unused
  std::uint64_t model_bits = 0;
};

struct Scenario {
  std::vector<DeviceDataset> devices;
  // Ground-truth labels for every sample, kept out of the datasets proper;
  // used only when scoring target-side accuracy.
  std::vector<std::vector<int>> eval_labels;
  CommProfile comm;
  std::uint64_t seed = 0;
  int num_devices = 0;
};

enum class DomainMode { kSingle, kMixed, kSplit };

DomainMode parse_domain_mode(const std::string& name);
std::string to_string(DomainMode mode);

struct ScenarioConfig {
  int num_domains = 2;
  int num_classes = 4;
  int feature_dim = 6;
  DomainMode mode = DomainMode::kSplit;
  double mean_scale = 3.0;         // spread of the shared class means
  double class_cov_scale = 1.0;
  double shift_scale = 4.0;        // pairwise domain translation in split mode
  double rotation_step = 0.15;     // radians between consecutive domains
  int domain_label_subset = 0;     // 0 keeps all classes in every domain

  int num_devices = 10;
  int samples_per_device = 400;
  double dirichlet_beta = 0.5;
  std::pair<double, double> labeled_fraction_range{0.3, 0.9};

  std::pair<double, double> tx_power_range_dbm{23.0, 25.0};
  std::pair<double, double> rate_range_bps{63e6, 85e6};
  std::uint64_t model_bits = 1000000000ull;  // 1 Gbit
};

std::vector<DomainSpec> synthesize_domains(const ScenarioConfig& config, std::uint64_t rng_seed);

Scenario partition(const std::vector<DomainSpec>& domains, const ScenarioConfig& config,
                   std::uint64_t rng_seed);

// Transfer energy in joules for one full model push over link (i, j):
// model_bits / rate * watts(tx_power_dbm).
double energy_constant(const CommProfile& comm, int i, int j);

// Pairwise energy matrix with a zero diagonal.
Mat energy_matrix(const CommProfile& comm);

// IDX-format loader (big-endian), features scaled to [0,1], labels present.
DeviceDataset load_idx(const std::string& path_images, const std::string& path_labels);

inline Scenario make_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  return partition(synthesize_domains(config, seed), config, seed);
}

}  // namespace stlf
