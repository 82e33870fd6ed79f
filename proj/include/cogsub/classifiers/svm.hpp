#pragma once

// Soft-margin support vector machines (hinge loss, box constraint C). The
// kernel machine is trained with SMO and second-order working-set selection;
// both solvers stop when the maximal KKT violation drops below tol.

#include "cogsub/classifiers/kind.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace cogsub::classifiers {

namespace detail {

struct SmoSolution {
  std::vector<double> alpha;
  double rho = 0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) - rho
  std::size_t iterations = 0;
};

/// kernel_row(i) returns a pointer to K(x_i, x_t) for every t (length n)
/// that stays valid for the whole solve. Samples with active[t] == 0 stay at alpha = 0
/// and never enter the working set, so one kernel matrix can serve every
/// cross-validation fold. An empty `active` means all samples train.
///
/// Index sets I_up / I_low are kept as additive penalty arrays (0 or -/+inf),
/// which keeps the working-set scans free of label and bound tests.
template <typename KernelRow>
SmoSolution solve_smo(std::span<const double> y_signs, std::span<const double> kdiag_in,
                      std::span<const std::uint8_t> active, double c, double tol, std::size_t max_iter,
                      KernelRow&& kernel_row) {
  using Array = Eigen::ArrayXd;
  const auto n = static_cast<Eigen::Index>(y_signs.size());
  const Eigen::Map<const Array> ys(y_signs.data(), n);
  const Eigen::Map<const Array> kdiag(kdiag_in.data(), n);
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double tau = 1e-12;
  auto is_active = [&](Eigen::Index t) { return active.empty() || active[static_cast<std::size_t>(t)] != 0; };

  Array alpha = Array::Zero(n);
  Array grad = Array::Constant(n, -1.0);
  Array up_pen = Array::Constant(n, -inf), low_pen = Array::Constant(n, inf);
  auto refresh = [&](Eigen::Index t) {
    const bool up = (ys(t) > 0 && alpha(t) < c) || (ys(t) < 0 && alpha(t) > 0);
    const bool low = (ys(t) > 0 && alpha(t) > 0) || (ys(t) < 0 && alpha(t) < c);
    up_pen(t) = up ? 0.0 : -inf;
    low_pen(t) = low ? 0.0 : inf;
  };
  for (Eigen::Index t = 0; t < n; ++t)
    if (is_active(t)) refresh(t);

  SmoSolution sol;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating pair: i maximizes -y g over I_up, gmin is the
    // minimum over I_low; j is then chosen by second-order gain.
    double gmax = -inf, gmin = inf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double vt = -ys(t) * grad(t);
      if (vt + up_pen(t) > gmax) {
        gmax = vt + up_pen(t);
        i = t;
      }
      gmin = std::min(gmin, vt + low_pen(t));
    }
    if (i < 0 || gmax - gmin < tol) break;
    const double* ki = kernel_row(i);
    const double kii = kdiag(i);
    // Maximizes b^2 / a; compared by cross-multiplication to avoid a division per sample.
    Eigen::Index j = -1;
    double best_num = 0, best_den = 1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double b = gmax + ys(t) * grad(t);
      const double a = std::max(kii + kdiag(t) - 2.0 * ki[t], tau);
      if (b > 0.0 && low_pen(t) == 0.0 && b * b * best_den > best_num * a) {
        best_num = b * b;
        best_den = a;
        j = t;
      }
    }
    if (j < 0) break;
    const double* kj = kernel_row(j);

    const double old_ai = alpha(i), old_aj = alpha(j);
    double quad = kii + kdiag(j) - 2.0 * ki[j];
    if (quad <= 0) quad = tau;
    if (ys(i) != ys(j)) {
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = diff; }
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = c - diff; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = -diff; }
        if (alpha(j) > c) { alpha(j) = c; alpha(i) = c + diff; }
      }
    } else {
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) { alpha(i) = c; alpha(j) = sum - c; }
        if (alpha(j) > c) { alpha(j) = c; alpha(i) = sum - c; }
      } else {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = sum; }
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = sum; }
      }
    }
    // grad_t += y_t (y_i dalpha_i K_it + y_j dalpha_j K_jt)
    const double wi = ys(i) * (alpha(i) - old_ai), wj = ys(j) * (alpha(j) - old_aj);
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += ys(t) * (wi * ki[t] + wj * kj[t]);
    refresh(i);
    refresh(j);
  }
  sol.iterations = iter;

  // Bias from free vectors; midpoint of the feasible interval otherwise.
  double sum_free = 0, ub = inf, lb = -inf;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!is_active(t)) continue;
    const double yg = ys(t) * grad(t);
    if (alpha(t) > 0 && alpha(t) < c) {
      sum_free += yg;
      ++n_free;
    } else if ((alpha(t) == 0 && ys(t) > 0) || (alpha(t) == c && ys(t) < 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  sol.rho = std::isfinite(rho) ? rho : 0.0;
  sol.alpha.assign(alpha.data(), alpha.data() + n);
  return sol;
}

inline std::size_t smo_iteration_cap(int max_epochs, std::size_t n) {
  return static_cast<std::size_t>(std::max(1, max_epochs)) * std::max<std::size_t>(n, 1);
}

inline std::vector<double> signs(std::span<const Label> y) {
  std::vector<double> ys(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) ys[i] = to_sign(y[i]);
  return ys;
}

}  // namespace detail

/// Linear SVM solved in the dual by coordinate descent, one coordinate at a
/// time in a fixed-seed random order. The bias enters as a constant feature
/// of value 1, so it is regularized along with the weights.
class LinearSvmModel {
 public:
  static LinearSvmModel fit(const LinearSvmParams& params, const Matrix& x, std::span<const Label> y) {
    if (!(params.c > 0)) throw Error(ErrorCode::kConfig, "SVM C must be positive");
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto ys = detail::signs(y);
    const double c = params.c;
    Eigen::ArrayXd qdiag(n);
    for (Eigen::Index i = 0; i < n; ++i) qdiag(i) = x.row(i).squaredNorm() + 1.0;
    Vector w = Vector::Zero(x.cols());
    double b = 0;
    std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(0x5eed);
    // Coordinates stuck at a bound with a gradient pushing outward are set
    // aside; once the rest converge, all are restored for a final check.
    std::size_t active = order.size();
    double pg_max_old = std::numeric_limits<double>::infinity();
    double pg_min_old = -std::numeric_limits<double>::infinity();
    std::size_t epoch = 0;
    const auto max_epochs = static_cast<std::size_t>(std::max(1, params.max_epochs));
    for (; epoch < max_epochs; ++epoch) {
      std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active), rng);
      double pg_max = -std::numeric_limits<double>::infinity();
      double pg_min = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < active; ++k) {
        const Eigen::Index i = order[k];
        const auto si = static_cast<std::size_t>(i);
        const double g = ys[si] * (x.row(i).dot(w) + b) - 1.0;
        double pg = g;
        if (alpha[si] == 0) {
          if (g > pg_max_old) {
            std::swap(order[k--], order[--active]);
            continue;
          }
          pg = std::min(g, 0.0);
        } else if (alpha[si] == c) {
          if (g < pg_min_old) {
            std::swap(order[k--], order[--active]);
            continue;
          }
          pg = std::max(g, 0.0);
        }
        pg_max = std::max(pg_max, pg);
        pg_min = std::min(pg_min, pg);
        if (pg == 0) continue;
        const double old = alpha[si];
        alpha[si] = std::clamp(old - g / qdiag(i), 0.0, c);
        const double step = (alpha[si] - old) * ys[si];
        w.noalias() += step * x.row(i).transpose();
        b += step;
      }
      if (active == 0 || pg_max - pg_min < params.tol) {
        if (active == order.size()) break;
        active = order.size();
        pg_max_old = std::numeric_limits<double>::infinity();
        pg_min_old = -std::numeric_limits<double>::infinity();
        continue;
      }
      pg_max_old = pg_max > 0 ? pg_max : std::numeric_limits<double>::infinity();
      pg_min_old = pg_min < 0 ? pg_min : -std::numeric_limits<double>::infinity();
    }
    LinearSvmModel m;
    m.weights_ = std::move(w);
    m.bias_ = b;
    m.iterations_ = epoch;
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return row.dot(weights_) + bias_; }
  /// Completed passes over the training set.
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  Vector weights_;
  double bias_ = 0;
  std::size_t iterations_ = 0;
};

class RbfSvmModel {
 public:
  static RbfSvmModel fit(const RbfSvmParams& params, const Matrix& x, std::span<const Label> y) {
    if (!(params.c > 0)) throw Error(ErrorCode::kConfig, "SVM C must be positive");
    const auto n = static_cast<std::size_t>(x.rows());
    const double gamma = params.gamma > 0 ? params.gamma : 1.0 / static_cast<double>(x.cols());
    const auto ys = detail::signs(y);
    Eigen::ArrayXd sq(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) sq(i) = x.row(i).squaredNorm();
    const std::vector<double> kdiag(n, 1.0);
    std::vector<Eigen::VectorXd> cache(n);  // lazily computed kernel rows
    auto sol = detail::solve_smo(ys, kdiag, {}, params.c, params.tol, detail::smo_iteration_cap(params.max_epochs, n),
                                 [&](Eigen::Index i) -> const double* {
                                   auto& r = cache[static_cast<std::size_t>(i)];
                                   if (r.size() == 0) {
                                     r.noalias() = x * x.row(i).transpose();
                                     r = (-gamma * (sq + sq(i) - 2.0 * r.array()).max(0.0)).exp().matrix();
                                   }
                                   return r.data();
                                 });

    return from_solution(sol, x, ys, sq, gamma);
  }

  /// Kernel-matrix variant for cross-validation: `gram` holds K over all
  /// samples, `y` their labels, and only samples with train[t] != 0 are
  /// fitted. Only gram_scores can evaluate the result.
  static RbfSvmModel fit_gram(const RbfSvmParams& params, const Matrix& gram, std::span<const Label> y,
                              std::span<const std::uint8_t> train) {
    if (!(params.c > 0)) throw Error(ErrorCode::kConfig, "SVM C must be positive");
    const auto ys = detail::signs(y);
    std::size_t n_pos = 0, n_train = 0;
    for (std::size_t t = 0; t < ys.size(); ++t)
      if (train[t]) {
        ++n_train;
        n_pos += ys[t] > 0;
      }
    if (n_pos == 0 || n_pos == n_train)
      throw Error(ErrorCode::kDegenerateLabels, "training labels contain a single class");
    const std::vector<double> kdiag(ys.size(), 1.0);
    auto sol = detail::solve_smo(ys, kdiag, train, params.c, params.tol,
                                 detail::smo_iteration_cap(params.max_epochs, n_train),
                                 [&](Eigen::Index i) { return gram.row(i).data(); });
    RbfSvmModel m;
    m.rho_ = sol.rho;
    m.iterations_ = sol.iterations;
    for (std::size_t t = 0; t < ys.size(); ++t)
      if (sol.alpha[t] > 0) {
        m.gram_support_.push_back(static_cast<Eigen::Index>(t));
        m.gram_coef_.push_back(sol.alpha[t] * ys[t]);
      }
    return m;
  }

  /// Decision values for the samples `rows` of the kernel matrix used in fit_gram.
  std::vector<double> gram_scores(const Matrix& gram, std::span<const Eigen::Index> rows) const {
    std::vector<double> out(rows.size(), -rho_);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t s = 0; s < gram_support_.size(); ++s) out[r] += gram_coef_[s] * gram(rows[r], gram_support_[s]);
    return out;
  }

  /// K(a, b) = exp(-gamma |a - b|^2) over all rows of x; gamma <= 0 means 1 / n_features.
  static Matrix gram_matrix(const Matrix& x, double gamma) {
    if (!(gamma > 0)) gamma = 1.0 / static_cast<double>(x.cols());
    const Eigen::ArrayXd sq = x.rowwise().squaredNorm();
    Matrix k = x * x.transpose();
    // Upper triangle only, then mirrored block by block: exp dominates the cost.
    const Eigen::Index n = k.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index m = n - i;
      k.row(i).tail(m) =
          (-gamma * (sq.tail(m).transpose() + sq(i) - 2.0 * k.row(i).tail(m).array()).max(0.0)).exp();
    }
    constexpr Eigen::Index kBlock = 64;
    for (Eigen::Index r0 = 0; r0 < n; r0 += kBlock)
      for (Eigen::Index c0 = 0; c0 <= r0; c0 += kBlock) {
        const Eigen::Index r1 = std::min(n, r0 + kBlock), c1 = std::min(n, c0 + kBlock);
        for (Eigen::Index r = r0; r < r1; ++r)
          for (Eigen::Index c = c0; c < std::min(c1, r); ++c) k(r, c) = k(c, r);
      }
    return k;
  }

 private:
  static RbfSvmModel from_solution(const detail::SmoSolution& sol, const Matrix& x, const std::vector<double>& ys,
                                   const Eigen::ArrayXd& sq, double gamma) {
    const auto n = static_cast<std::size_t>(x.rows());
    RbfSvmModel m;
    m.gamma_ = gamma;
    m.rho_ = sol.rho;
    m.iterations_ = sol.iterations;
    std::size_t n_sv = 0;
    for (double a : sol.alpha) n_sv += a > 0;
    m.support_ = Matrix(static_cast<Eigen::Index>(n_sv), x.cols());
    m.coef_ = Eigen::ArrayXd(static_cast<Eigen::Index>(n_sv));
    m.support_sq_ = Eigen::ArrayXd(static_cast<Eigen::Index>(n_sv));
    for (std::size_t t = 0, s = 0; t < n; ++t)
      if (sol.alpha[t] > 0) {
        const auto si = static_cast<Eigen::Index>(s++);
        m.support_.row(si) = x.row(static_cast<Eigen::Index>(t));
        m.coef_(si) = sol.alpha[t] * ys[t];
        m.support_sq_(si) = sq(static_cast<Eigen::Index>(t));
      }
    return m;
  }

 public:
  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (support_.rows() == 0) return -rho_;
    Eigen::ArrayXd d2 = (support_sq_ + row.squaredNorm() - 2.0 * (support_ * row.transpose()).array()).max(0.0);
    return (coef_ * (-gamma_ * d2).exp()).sum() - rho_;
  }

  std::size_t iterations() const noexcept { return iterations_; }
  std::size_t n_support() const noexcept { return static_cast<std::size_t>(support_.rows()); }

 private:
  Matrix support_;
  Eigen::ArrayXd coef_;
  Eigen::ArrayXd support_sq_;
  std::vector<Eigen::Index> gram_support_;
  std::vector<double> gram_coef_;
  double gamma_ = 1;
  double rho_ = 0;
  std::size_t iterations_ = 0;
};

}  // namespace cogsub::classifiers
