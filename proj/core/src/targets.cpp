#include "boltzcurve/targets.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace bc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLog2Pi = 1.8378770664093454836;
}  // namespace

Box Box::cube(int dim, double a, double b) {
  Box box;
  box.lo = Eigen::VectorXd::Constant(dim, a);
  box.hi = Eigen::VectorXd::Constant(dim, b);
  return box;
}

Eigen::VectorXd EnergyTarget::sample(Rng&) const {
  throw std::logic_error("target '" + name() + "' has no exact sampler");
}

void EnergyTarget::check_dim(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw std::invalid_argument("target '" + name() + "': expected dim " +
                                std::to_string(dim()) + ", got " +
                                std::to_string(x.size()));
  }
}

// ---------------------------------------------------------------------------
// Gaussian mixture
// ---------------------------------------------------------------------------

GmmEnergy::GmmEnergy(Eigen::MatrixXd means, Box box)
    : means_(std::move(means)), box_(std::move(box)) {
  if (means_.rows() < 1) throw std::invalid_argument("GmmEnergy: no means");
}

struct GmmEnergy::Moments {
  double energy;
  Eigen::VectorXd mean_dev;   // sum_k w_k (x - mu_k)
  double mean_sq;             // sum_k w_k |x - mu_k|^2
};

GmmEnergy::Moments GmmEnergy::moments(const Eigen::VectorXd& x) const {
  const Eigen::Index K = means_.rows();
  const Eigen::Index d = means_.cols();
  Eigen::VectorXd neg_half_sq(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    neg_half_sq[k] = -0.5 * (x.transpose() - means_.row(k)).squaredNorm();
  }
  const double m = neg_half_sq.maxCoeff();
  Eigen::VectorXd w = (neg_half_sq.array() - m).exp();
  const double total = w.sum();
  w /= total;

  Moments res;
  res.energy = std::log(static_cast<double>(K)) +
               0.5 * static_cast<double>(d) * kLog2Pi - (m + std::log(total));
  res.mean_dev = Eigen::VectorXd::Zero(d);
  res.mean_sq = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::VectorXd dev = x - means_.row(k).transpose();
    res.mean_dev += w[k] * dev;
    res.mean_sq += w[k] * dev.squaredNorm();
  }
  return res;
}

double GmmEnergy::energy(const Eigen::VectorXd& x) const {
  check_dim(x);
  return moments(x).energy;
}

Eigen::VectorXd GmmEnergy::grad(const Eigen::VectorXd& x) const {
  check_dim(x);
  return moments(x).mean_dev;
}

double GmmEnergy::laplacian(const Eigen::VectorXd& x) const {
  check_dim(x);
  const Moments m = moments(x);
  return static_cast<double>(dim()) - m.mean_sq + m.mean_dev.squaredNorm();
}

Eigen::VectorXd GmmEnergy::sample(Rng& rng) const {
  const Eigen::Index K = means_.rows();
  auto k = static_cast<Eigen::Index>(rng.uniform01() * static_cast<double>(K));
  if (k >= K) k = K - 1;
  Eigen::VectorXd x = means_.row(k).transpose();
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += rng.normal();
  return x;
}

std::string GmmEnergy::spec_json() const {
  if (has_seed_) {
    return std::string("{\"name\":\"gmm40\",\"seed\":") +
           std::to_string(seed_tag_) + "}";
  }
  nlohmann::json j;
  j["name"] = "gmm";
  std::vector<std::vector<double>> mm;
  for (Eigen::Index k = 0; k < means_.rows(); ++k) {
    mm.emplace_back(means_.row(k).begin(), means_.row(k).end());
  }
  j["means"] = mm;
  return j.dump();
}

std::shared_ptr<const GmmEnergy> gmm40(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd means(40, 2);
  for (int k = 0; k < 40; ++k) {
    means(k, 0) = rng.uniform(-40.0, 40.0);
    means(k, 1) = rng.uniform(-40.0, 40.0);
  }
  auto g = std::make_shared<GmmEnergy>(means, Box::cube(2, -50.0, 50.0));
  g->set_seed_tag(seed);
  return g;
}

// ---------------------------------------------------------------------------
// Many-well
// ---------------------------------------------------------------------------

double ManywellEnergy::block_energy(double x1, double x2) {
  const double x1sq = x1 * x1;
  return x1sq * x1sq - 6.0 * x1sq - 0.5 * x1 + 0.5 * x2 * x2;
}

ManywellEnergy::ManywellEnergy() : box_(Box::cube(8, -4.0, 4.0)) {
  // First-coordinate log density b(x) = -x^4 + 6x^2 + x/2; wells found by
  // Newton from +-sqrt(3), envelope is a two-component Gaussian mixture.
  for (int s = 0; s < 2; ++s) {
    double x = s == 0 ? -std::sqrt(3.0) : std::sqrt(3.0);
    for (int it = 0; it < 60; ++it) {
      const double f1 = -4.0 * x * x * x + 12.0 * x + 0.5;
      const double f2 = -12.0 * x * x + 12.0;
      x -= f1 / f2;
    }
    env_center_[s] = x;
  }
  env_sigma_ = 0.32;
  double log_m = -std::numeric_limits<double>::infinity();
  const int n_grid = 200001;
  for (int i = 0; i < n_grid; ++i) {
    const double x = -5.0 + 10.0 * static_cast<double>(i) / (n_grid - 1);
    const double b = -std::pow(x, 4) + 6.0 * x * x + 0.5 * x;
    double q = 0.0;
    for (double c : env_center_) {
      const double z = (x - c) / env_sigma_;
      q += 0.5 * std::exp(-0.5 * z * z) / (env_sigma_ * std::sqrt(2.0 * kPi));
    }
    log_m = std::max(log_m, b - std::log(q));
  }
  env_log_m_ = log_m + 0.05;  // safety margin over the grid maximum
}

double ManywellEnergy::energy(const Eigen::VectorXd& x) const {
  check_dim(x);
  double e = 0.0;
  for (int b = 0; b < 4; ++b) e += block_energy(x[2 * b], x[2 * b + 1]);
  return e;
}

Eigen::VectorXd ManywellEnergy::grad(const Eigen::VectorXd& x) const {
  check_dim(x);
  Eigen::VectorXd g(8);
  for (int b = 0; b < 4; ++b) {
    const double x1 = x[2 * b];
    g[2 * b] = 4.0 * x1 * x1 * x1 - 12.0 * x1 - 0.5;
    g[2 * b + 1] = x[2 * b + 1];
  }
  return g;
}

double ManywellEnergy::laplacian(const Eigen::VectorXd& x) const {
  check_dim(x);
  double lap = 0.0;
  for (int b = 0; b < 4; ++b) {
    const double x1 = x[2 * b];
    lap += 12.0 * x1 * x1 - 12.0 + 1.0;
  }
  return lap;
}

double ManywellEnergy::first_coord_sample(Rng& rng) const {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const int comp = rng.uniform01() < 0.5 ? 0 : 1;
    const double x = env_center_[comp] + env_sigma_ * rng.normal();
    double q = 0.0;
    for (double c : env_center_) {
      const double z = (x - c) / env_sigma_;
      q += 0.5 * std::exp(-0.5 * z * z) / (env_sigma_ * std::sqrt(2.0 * kPi));
    }
    const double b = -std::pow(x, 4) + 6.0 * x * x + 0.5 * x;
    if (std::log(rng.uniform01_pos()) < b - std::log(q) - env_log_m_) {
      return x;
    }
  }
  throw std::runtime_error("manywell sampler: rejection loop did not accept");
}

Eigen::VectorXd ManywellEnergy::sample(Rng& rng) const {
  Eigen::VectorXd x(8);
  for (int b = 0; b < 4; ++b) {
    x[2 * b] = first_coord_sample(rng);
    x[2 * b + 1] = rng.normal();
  }
  return x;
}

std::string ManywellEnergy::spec_json() const {
  return "{\"name\":\"manywell\"}";
}

std::shared_ptr<const ManywellEnergy> manywell8() {
  static const auto instance = std::make_shared<const ManywellEnergy>();
  return instance;
}

// ---------------------------------------------------------------------------
// Gaussian latent
// ---------------------------------------------------------------------------

GaussianEnergy::GaussianEnergy(double sigma, int dim) : sigma_(sigma), dim_(dim) {
  if (sigma <= 0.0) throw std::invalid_argument("GaussianEnergy: sigma <= 0");
  if (dim <= 0) throw std::invalid_argument("GaussianEnergy: dim <= 0");
  box_ = Box::cube(dim, -5.0 * sigma, 5.0 * sigma);
}

double GaussianEnergy::energy(const Eigen::VectorXd& x) const {
  check_dim(x);
  return x.squaredNorm() / (2.0 * sigma_ * sigma_) +
         0.5 * dim_ * std::log(2.0 * kPi * sigma_ * sigma_);
}

Eigen::VectorXd GaussianEnergy::grad(const Eigen::VectorXd& x) const {
  check_dim(x);
  return x / (sigma_ * sigma_);
}

double GaussianEnergy::laplacian(const Eigen::VectorXd& x) const {
  check_dim(x);
  return dim_ / (sigma_ * sigma_);
}

Eigen::VectorXd GaussianEnergy::sample(Rng& rng) const {
  Eigen::VectorXd x(dim_);
  for (int i = 0; i < dim_; ++i) x[i] = sigma_ * rng.normal();
  return x;
}

std::string GaussianEnergy::spec_json() const {
  std::ostringstream os;
  os << "{\"name\":\"gaussian\",\"sigma\":" << sigma_ << ",\"dim\":" << dim_
     << "}";
  return os.str();
}

std::shared_ptr<const GaussianEnergy> gaussian_latent(double sigma, int dim) {
  return std::make_shared<const GaussianEnergy>(sigma, dim);
}

// ---------------------------------------------------------------------------
// Laplacian pair
// ---------------------------------------------------------------------------

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

class LaplaceEnergy : public EnergyTarget {
 public:
  explicit LaplaceEnergy(Box box) : box_(std::move(box)) {}
  const std::string& name() const override { return name_; }
  int dim() const override { return 1; }
  const Box& domain_box() const override { return box_; }
  bool normalized() const override { return false; }
  double energy(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return std::abs(x[0]);
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return Eigen::VectorXd::Constant(1, sign0(x[0]));
  }
  double laplacian(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return 0.0;
  }
  std::string spec_json() const override {
    return "{\"name\":\"laplace0\"}";
  }

 private:
  std::string name_ = "laplace0";
  Box box_;
};

class BimodalLaplaceEnergy : public EnergyTarget {
 public:
  BimodalLaplaceEnergy(double m, Box box) : m_(m), box_(std::move(box)) {}
  const std::string& name() const override { return name_; }
  int dim() const override { return 1; }
  const Box& domain_box() const override { return box_; }
  bool normalized() const override { return false; }
  double energy(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return 2.0 * std::min(std::abs(x[0]), std::abs(x[0] - m_));
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override {
    check_dim(x);
    const double a = std::abs(x[0]);
    const double b = std::abs(x[0] - m_);
    const double g = a <= b ? 2.0 * sign0(x[0]) : 2.0 * sign0(x[0] - m_);
    return Eigen::VectorXd::Constant(1, g);
  }
  double laplacian(const Eigen::VectorXd& x) const override {
    check_dim(x);
    return 0.0;
  }
  std::string spec_json() const override {
    std::ostringstream os;
    os << "{\"name\":\"laplace1\",\"m\":" << m_ << "}";
    return os.str();
  }

 private:
  std::string name_ = "laplace1";
  double m_;
  Box box_;
};

class ShiftedEnergy : public EnergyTarget {
 public:
  ShiftedEnergy(TargetPtr base, double offset)
      : base_(std::move(base)), offset_(offset) {
    name_ = base_->name() + "+const";
  }
  const std::string& name() const override { return name_; }
  int dim() const override { return base_->dim(); }
  const Box& domain_box() const override { return base_->domain_box(); }
  bool normalized() const override { return false; }
  double energy(const Eigen::VectorXd& x) const override {
    return base_->energy(x) + offset_;
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& x) const override {
    return base_->grad(x);
  }
  double laplacian(const Eigen::VectorXd& x) const override {
    return base_->laplacian(x);
  }
  bool has_sampler() const override { return base_->has_sampler(); }
  Eigen::VectorXd sample(Rng& rng) const override { return base_->sample(rng); }
  std::string spec_json() const override {
    nlohmann::json j;
    j["name"] = "shifted";
    j["offset"] = offset_;
    j["base"] = nlohmann::json::parse(base_->spec_json());
    return j.dump();
  }

 private:
  TargetPtr base_;
  double offset_;
  std::string name_;
};

}  // namespace

std::pair<TargetPtr, TargetPtr> laplacian_pair(double m) {
  if (m < 0.0) throw std::invalid_argument("laplacian_pair: m must be >= 0");
  Box box = Box::cube(1, -30.0, m + 30.0);
  return {std::make_shared<const LaplaceEnergy>(box),
          std::make_shared<const BimodalLaplaceEnergy>(m, box)};
}

TargetPtr shifted(TargetPtr base, double offset) {
  return std::make_shared<const ShiftedEnergy>(std::move(base), offset);
}

TargetPtr target_from_spec_json(const std::string& spec) {
  nlohmann::json j = nlohmann::json::parse(spec);
  const std::string name = j.at("name").get<std::string>();
  if (name == "gmm40") {
    return gmm40(j.at("seed").get<std::uint64_t>());
  }
  if (name == "gmm") {
    const auto rows = j.at("means").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd means(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index k = 0; k < means.rows(); ++k) {
      for (Eigen::Index i = 0; i < means.cols(); ++i) {
        means(k, i) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      }
    }
    const int d = static_cast<int>(means.cols());
    return std::make_shared<const GmmEnergy>(means, Box::cube(d, -50.0, 50.0));
  }
  if (name == "manywell") return manywell8();
  if (name == "gaussian") {
    return gaussian_latent(j.at("sigma").get<double>(), j.at("dim").get<int>());
  }
  if (name == "laplace0") return laplacian_pair(1.0).first;
  if (name == "laplace1") return laplacian_pair(j.at("m").get<double>()).second;
  if (name == "shifted") {
    return shifted(target_from_spec_json(j.at("base").dump()),
                   j.at("offset").get<double>());
  }
  throw std::invalid_argument("unknown target name '" + name + "'");
}

}  // namespace bc
