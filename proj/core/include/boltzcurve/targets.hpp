#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "boltzcurve/rng.hpp"

namespace bc {

/// Axis-aligned box, one [lo, hi] interval per coordinate.
struct Box {
  Eigen::VectorXd lo, hi;

  static Box cube(int dim, double a, double b);
};

/// Unnormalized energy f with analytic spatial derivatives. Densities are
/// rho = exp(-f)/Z; `normalized()` is true when f already contains log Z so
/// that -f is an exact log density. All evaluations are pure and safe to call
/// concurrently.
class EnergyTarget {
 public:
  virtual ~EnergyTarget() = default;

  virtual const std::string& name() const = 0;
  virtual int dim() const = 0;
  virtual const Box& domain_box() const = 0;
  virtual bool normalized() const = 0;

  virtual double energy(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd grad(const Eigen::VectorXd& x) const = 0;
  virtual double laplacian(const Eigen::VectorXd& x) const = 0;

  virtual bool has_sampler() const { return false; }
  virtual Eigen::VectorXd sample(Rng& rng) const;

  /// Compact JSON description, enough to reconstruct via target_from_spec_json.
  virtual std::string spec_json() const = 0;

 protected:
  void check_dim(const Eigen::VectorXd& x) const;
};

using TargetPtr = std::shared_ptr<const EnergyTarget>;

/// Isotropic unit-covariance Gaussian mixture with evenly weighted modes;
/// energy includes the Gaussian normalizer (normalized = true).
class GmmEnergy : public EnergyTarget {
 public:
  explicit GmmEnergy(Eigen::MatrixXd means, Box box);  // means: K x d rows

  const std::string& name() const override { return name_; }
  int dim() const override { return static_cast<int>(means_.cols()); }
  const Box& domain_box() const override { return box_; }
  bool normalized() const override { return true; }
  double energy(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override;
  double laplacian(const Eigen::VectorXd& x) const override;
  bool has_sampler() const override { return true; }
  Eigen::VectorXd sample(Rng& rng) const override;
  std::string spec_json() const override;

  const Eigen::MatrixXd& means() const { return means_; }
  void set_seed_tag(std::uint64_t seed) {
    seed_tag_ = seed;
    has_seed_ = true;
    name_ = "gmm40";
  }

 private:
  struct Moments;
  Moments moments(const Eigen::VectorXd& x) const;

  std::string name_ = "gmm";
  Eigen::MatrixXd means_;
  Box box_;
  std::uint64_t seed_tag_ = 0;
  bool has_seed_ = false;
};

/// 40 modes in the plane, means uniform on [-40, 40]^2. The seed -> means map
/// is pinned: the k-th mean consumes draws 2k, 2k+1 of Rng(seed) scaled to the
/// square (see Rng for the splitmix64 stream definition).
std::shared_ptr<const GmmEnergy> gmm40(std::uint64_t seed);

/// Four independent 2D double-well blocks in R^8 (unnormalized).
class ManywellEnergy : public EnergyTarget {
 public:
  ManywellEnergy();

  const std::string& name() const override { return name_; }
  int dim() const override { return 8; }
  const Box& domain_box() const override { return box_; }
  bool normalized() const override { return false; }
  double energy(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override;
  double laplacian(const Eigen::VectorXd& x) const override;
  bool has_sampler() const override { return true; }
  Eigen::VectorXd sample(Rng& rng) const override;
  std::string spec_json() const override;

  /// Energy of one 2D block: x1^4 - 6 x1^2 - x1/2 + x2^2/2.
  static double block_energy(double x1, double x2);

 private:
  std::string name_ = "manywell";
  Box box_;
  // rejection envelope for the first block coordinate
  double env_center_[2];
  double env_sigma_;
  double env_log_m_;
  double first_coord_sample(Rng& rng) const;
};

std::shared_ptr<const ManywellEnergy> manywell8();

/// Gaussian with covariance sigma^2 I, including its log-normalizer.
class GaussianEnergy : public EnergyTarget {
 public:
  GaussianEnergy(double sigma, int dim);

  const std::string& name() const override { return name_; }
  int dim() const override { return dim_; }
  const Box& domain_box() const override { return box_; }
  bool normalized() const override { return true; }
  double energy(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override;
  double laplacian(const Eigen::VectorXd& x) const override;
  bool has_sampler() const override { return true; }
  Eigen::VectorXd sample(Rng& rng) const override;
  std::string spec_json() const override;

  double sigma() const { return sigma_; }
  /// Exact log density at x (the energy is normalized).
  double log_density(const Eigen::VectorXd& x) const { return -energy(x); }

 private:
  std::string name_ = "gaussian";
  double sigma_;
  int dim_;
  Box box_;
};

std::shared_ptr<const GaussianEnergy> gaussian_latent(double sigma, int dim);

/// 1D Laplacian-type pair: f0 = |x| and f1 = 2 min(|x|, |x - m|), both
/// unnormalized. Gradients use the subgradient convention sign(0) = 0; at the
/// branch tie x = m/2 the first branch wins.
std::pair<TargetPtr, TargetPtr> laplacian_pair(double m);

/// Same target with a constant added to the energy (density unchanged).
TargetPtr shifted(TargetPtr base, double offset);

TargetPtr target_from_spec_json(const std::string& spec);

}  // namespace bc
