#pragma once

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation, restricted to the unit box [0, 1]^n.
// Out-of-box samples are redrawn a few times and then projected onto the
// box; the projected point is what gets evaluated and used in the update.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "servobench/errors.hpp"

namespace servobench {

/// Default population size 4 + floor(3 ln n).
inline int default_population(int dim) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dim))));
}

class CmaEs {
 public:
  using Vector = Eigen::VectorXd;
  using Matrix = Eigen::MatrixXd;

  CmaEs(Vector mean, double sigma, std::uint64_t seed, int population = 0)
      : n_(static_cast<int>(mean.size())),
        lambda_(population > 0 ? population : default_population(n_)),
        mean_(std::move(mean)),
        sigma_(sigma),
        rng_(seed) {
    if (n_ < 1) throw ConfigError("CMA-ES needs at least one dimension");
    if (!(sigma_ > 0.0)) throw ConfigError("CMA-ES step size must be > 0");
    if (lambda_ < 2) throw ConfigError("CMA-ES population must be >= 2");

    mu_ = lambda_ / 2;
    weights_.resize(mu_);
    for (int i = 0; i < mu_; ++i) {
      weights_[i] = std::log(mu_ + 0.5) - std::log(i + 1.0);
    }
    weights_ /= weights_.sum();
    mu_eff_ = 1.0 / weights_.squaredNorm();

    const double n = n_;
    c_c_ = (4.0 + mu_eff_ / n) / (n + 4.0 + 2.0 * mu_eff_ / n);
    c_s_ = (mu_eff_ + 2.0) / (n + mu_eff_ + 5.0);
    c_1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff_);
    c_mu_ = std::min(1.0 - c_1_,
                     2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) / ((n + 2.0) * (n + 2.0) + mu_eff_));
    d_s_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n + 1.0)) - 1.0) + c_s_;
    chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    p_c_ = Vector::Zero(n_);
    p_s_ = Vector::Zero(n_);
    C_ = Matrix::Identity(n_, n_);
    B_ = Matrix::Identity(n_, n_);
    D_ = Vector::Ones(n_);
  }

  int dimension() const { return n_; }
  int population() const { return lambda_; }
  int generation() const { return generation_; }
  double sigma() const { return sigma_; }
  const Vector& mean() const { return mean_; }

  /// Draws lambda candidates inside the unit box.
  std::vector<Vector> ask() {
    std::vector<Vector> out;
    out.reserve(lambda_);
    for (int i = 0; i < lambda_; ++i) {
      Vector x;
      bool inside = false;
      for (int attempt = 0; attempt < kMaxResamples && !inside; ++attempt) {
        x = mean_ + sigma_ * (B_ * D_.cwiseProduct(standard_normal()));
        inside = (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
      }
      if (!inside) x = x.cwiseMax(0.0).cwiseMin(1.0);
      out.push_back(std::move(x));
    }
    return out;
  }

  /// Updates the distribution from the candidates of the last ask().
  void tell(const std::vector<Vector>& xs, const std::vector<double>& fitness) {
    if (static_cast<int>(xs.size()) != lambda_ || fitness.size() != xs.size()) {
      throw ConfigError("CMA-ES tell() needs exactly lambda candidates");
    }
    std::vector<int> order(lambda_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[a] < fitness[b]; });

    const Vector old_mean = mean_;
    Vector new_mean = Vector::Zero(n_);
    for (int i = 0; i < mu_; ++i) new_mean += weights_[i] * xs[order[i]];
    mean_ = new_mean;

    const Vector y_w = (mean_ - old_mean) / sigma_;
    const Vector c_inv_sqrt_y = B_ * (B_.transpose() * y_w).cwiseQuotient(D_);
    p_s_ = (1.0 - c_s_) * p_s_ + std::sqrt(c_s_ * (2.0 - c_s_) * mu_eff_) * c_inv_sqrt_y;

    ++generation_;
    const double ps_norm = p_s_.norm();
    const double denom = std::sqrt(1.0 - std::pow(1.0 - c_s_, 2.0 * generation_));
    const bool h_s = ps_norm / denom < (1.4 + 2.0 / (n_ + 1.0)) * chi_n_;
    p_c_ = (1.0 - c_c_) * p_c_ +
           (h_s ? std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) : 0.0) * y_w;

    Matrix rank_mu = Matrix::Zero(n_, n_);
    for (int i = 0; i < mu_; ++i) {
      const Vector y = (xs[order[i]] - old_mean) / sigma_;
      rank_mu += weights_[i] * y * y.transpose();
    }
    const double delta_h = h_s ? 0.0 : c_c_ * (2.0 - c_c_);
    C_ = (1.0 - c_1_ - c_mu_) * C_ + c_1_ * (p_c_ * p_c_.transpose() + delta_h * C_) +
         c_mu_ * rank_mu;

    sigma_ *= std::exp((c_s_ / d_s_) * (ps_norm / chi_n_ - 1.0));
    // The unit box bounds the useful step size.
    sigma_ = std::min(sigma_, 1.0);

    decompose();
  }

  /// True once the search distribution has collapsed below resolution.
  bool converged() const { return sigma_ * D_.maxCoeff() < 1e-13; }

 private:
  static constexpr int kMaxResamples = 20;

  Vector standard_normal() {
    Vector z(n_);
    for (int i = 0; i < n_; ++i) z[i] = normal_(rng_);
    return z;
  }

  void decompose() {
    Matrix sym = 0.5 * (C_ + C_.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("CMA-ES covariance eigendecomposition failed");
    }
    Vector ev = eig.eigenvalues().cwiseMax(1e-300);
    // Keep the condition number bounded so sampling stays well defined.
    double floor = ev.maxCoeff() * 1e-14;
    ev = ev.cwiseMax(floor);
    B_ = eig.eigenvectors();
    D_ = ev.cwiseSqrt();
    C_ = B_ * ev.asDiagonal() * B_.transpose();
  }

  int n_;
  int lambda_;
  int mu_ = 0;
  Vector weights_;
  double mu_eff_ = 0.0;
  double c_c_ = 0.0, c_s_ = 0.0, c_1_ = 0.0, c_mu_ = 0.0, d_s_ = 0.0, chi_n_ = 0.0;

  Vector mean_;
  double sigma_;
  Vector p_c_, p_s_;
  Matrix C_, B_;
  Vector D_;
  int generation_ = 0;

  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace servobench
