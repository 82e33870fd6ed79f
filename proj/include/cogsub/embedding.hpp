#pragma once

// Exact t-SNE: Gaussian input affinities calibrated to a target perplexity,
// Student-t output kernel, gradient descent with momentum, per-coordinate
// gains and early exaggeration.

#include "cogsub/common.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cogsub {

struct TsneParams {
  double perplexity = 30;
  int n_iter = 1000;
  double learning_rate = 200;
  double early_exaggeration = 12;
  int exaggeration_iters = 250;
  double momentum_early = 0.5;
  double momentum_late = 0.8;
  std::uint64_t seed = 0;
  int kl_every = 50;  // KL is recorded every kl_every iterations and at the last one
};

struct KlRecord {
  int iteration = 0;
  double kl = 0;
};

struct Embedding2D {
  Matrix coords;  // n x 2
  std::vector<KlRecord> kl_trace;
  double final_kl = 0;     // KL of the returned coordinates
  int best_iteration = 0;  // iteration the returned coordinates come from
  TsneParams params;
};

/// Symmetric joint affinities stored as the strict upper triangle, row by row.
struct Affinities {
  std::size_t n = 0;
  std::vector<double> upper;  // P_ij for i < j

  std::size_t offset(std::size_t i) const noexcept { return i * (2 * n - i - 1) / 2; }
  double at(std::size_t i, std::size_t j) const noexcept {
    if (i == j) return 0;
    if (i > j) std::swap(i, j);
    return upper[offset(i) + (j - i - 1)];
  }
  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = at(i, j);
    return m;
  }
};

/// Perplexity must lie in [1, n-1], the range a conditional distribution over
/// n-1 neighbours can reach.
inline void validate_perplexity(double perplexity, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kParameter, "t-SNE needs at least 2 samples");
  if (!(perplexity >= 1) || !(perplexity <= static_cast<double>(n - 1)))
    throw Error(ErrorCode::kParameter, "perplexity " + std::to_string(perplexity) + " is infeasible for " +
                                           std::to_string(n) + " samples (allowed range [1, n-1])");
}

inline void validate(const TsneParams& p, std::size_t n) {
  validate_perplexity(p.perplexity, n);
  if (p.n_iter < 1 || !(p.learning_rate > 0) || !(p.early_exaggeration >= 1) || p.exaggeration_iters < 0 ||
      !(p.momentum_early >= 0 && p.momentum_early < 1) || !(p.momentum_late >= 0 && p.momentum_late < 1) ||
      p.kl_every < 1)
    throw Error(ErrorCode::kParameter, "invalid t-SNE parameters");
}

/// Row-wise squared Euclidean distances, computed from differences so that
/// rigid motions of the input leave them unchanged up to rounding.
inline std::vector<double> squared_distances(const Matrix& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
      d[i * n + j] = d[j * n + i] = v;
    }
  return d;
}

/// Binary search on the Gaussian precision of each row until 2^H equals the
/// perplexity within relative tolerance 1e-4, then P = (Pc + Pc^T) / 2n.
inline Affinities pairwise_affinities(const Matrix& x, double perplexity) {
  const auto n = static_cast<std::size_t>(x.rows());
  validate_perplexity(perplexity, n);
  const auto dist = squared_distances(x);
  const double target = std::log(perplexity);
  constexpr double kMaxBeta = 1e24;  // bandwidth floor of 1e-12
  std::vector<double> cond(n * n, 0.0);

  parallel_for(n, [&](std::size_t i) {
    const double* di = &dist[i * n];
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, di[j]);
    std::vector<double> w(n, 0.0);
    double beta = 1, lo = 0, hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
      double sum = 0, wd = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double rel = di[j] - dmin;  // shift for stability; cancels after normalising
        w[j] = std::exp(-beta * rel);
        sum += w[j];
        wd += w[j] * rel;
      }
      const double entropy = std::log(sum) + beta * wd / sum;
      if (std::abs(std::exp(entropy - target) - 1) < 1e-4) break;
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      beta = std::min(beta, kMaxBeta);
    }
    double sum = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum += w[j];
    for (std::size_t j = 0; j < n; ++j) cond[i * n + j] = j == i ? 0.0 : w[j] / sum;
  });

  Affinities p;
  p.n = n;
  p.upper.resize(n * (n - 1) / 2);
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) p.upper[k++] = (cond[i * n + j] + cond[j * n + i]) * scale;
  return p;
}

/// 2^H of a probability vector (H in bits).
inline double row_perplexity(std::span<const double> row) {
  double h = 0;
  for (double v : row)
    if (v > 0) h -= v * std::log2(v);
  return std::exp2(h);
}

namespace detail {

struct TsneWorkspace {
  std::vector<double> num;  // 1 / (1 + |y_i - y_j|^2), upper triangle
  double z = 0;
};

// Fills num and z for the current coordinates.
inline void student_kernel(const Eigen::ArrayXd& xs, const Eigen::ArrayXd& ys, TsneWorkspace& ws) {
  const auto n = static_cast<std::size_t>(xs.size());
  ws.num.resize(n * (n - 1) / 2);
  double z = 0;
  double* num = ws.num.data();
  const double* xp = xs.data();
  const double* yp = ys.data();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double xi = xp[i], yi = yp[i];
    for (std::size_t j = i + 1; j < n; ++j, ++num) {
      const double dx = xp[j] - xi, dy = yp[j] - yi;
      *num = 1.0 / (1.0 + dx * dx + dy * dy);
      z += *num;
    }
  }
  ws.z = 2 * z;
}

inline double p_log_p(const Affinities& p) {
  double s = 0;
  for (double v : p.upper)
    if (v > 0) s += v * std::log(v);
  return 2 * s;
}

// KL(P || Q) given sum over ordered pairs of p log p.
inline double kl_divergence(const Affinities& p, const TsneWorkspace& ws, double plogp) {
  double cross = 0;  // sum over i<j of p_ij * log(num_ij)
  for (std::size_t k = 0; k < p.upper.size(); ++k)
    if (p.upper[k] > 0) cross += p.upper[k] * std::log(ws.num[k]);
  return std::max(0.0, plogp - 2 * cross + std::log(ws.z));
}

// Gradient of KL(exaggeration * P || Q) with respect to the coordinates.
inline void gradient(const Affinities& p, double exaggeration, const Eigen::ArrayXd& xs, const Eigen::ArrayXd& ys,
                     const TsneWorkspace& ws, Eigen::ArrayXd& gx, Eigen::ArrayXd& gy) {
  const auto n = static_cast<std::size_t>(xs.size());
  gx.setZero(static_cast<Eigen::Index>(n));
  gy.setZero(static_cast<Eigen::Index>(n));
  const double inv_z = 1.0 / ws.z;
  const double* num = ws.num.data();
  const double* pij = p.upper.data();
  double* gxp = gx.data();
  double* gyp = gy.data();
  const double* xp = xs.data();
  const double* yp = ys.data();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double xi = xp[i], yi = yp[i];
    double sx = 0, sy = 0;
    for (std::size_t j = i + 1; j < n; ++j, ++num, ++pij) {
      const double f = (exaggeration * *pij - *num * inv_z) * *num;
      const double fx = f * (xp[j] - xi), fy = f * (yp[j] - yi);
      sx += fx;
      sy += fy;
      gxp[j] += fx;
      gyp[j] += fy;
    }
    gxp[i] -= sx;
    gyp[i] -= sy;
  }
  gx *= 4;
  gy *= 4;
}

}  // namespace detail

/// KL(P || Q) for an explicit n x 2 layout.
inline double tsne_kl(const Affinities& p, const Matrix& y) {
  detail::TsneWorkspace ws;
  const Eigen::ArrayXd xs = y.col(0), ys = y.col(1);
  detail::student_kernel(xs, ys, ws);
  return detail::kl_divergence(p, ws, detail::p_log_p(p));
}

/// Analytic gradient of KL(P || Q) at layout y (n x 2).
inline Matrix tsne_gradient(const Affinities& p, const Matrix& y) {
  detail::TsneWorkspace ws;
  const Eigen::ArrayXd xs = y.col(0), ys = y.col(1);
  detail::student_kernel(xs, ys, ws);
  Eigen::ArrayXd gx, gy;
  detail::gradient(p, 1.0, xs, ys, ws, gx, gy);
  Matrix g(y.rows(), 2);
  g.col(0) = gx.matrix();
  g.col(1) = gy.matrix();
  return g;
}

/// Returns the lowest-KL recorded iterate after the exaggeration phase (or
/// over all recorded iterates when the run never leaves it).
inline Embedding2D tsne(const Matrix& x, const TsneParams& params) {
  const auto n = static_cast<std::size_t>(x.rows());
  validate(params, n);
  const Affinities p = pairwise_affinities(x, params.perplexity);
  const double plogp = detail::p_log_p(p);
  const auto nn = static_cast<Eigen::Index>(n);

  std::mt19937_64 rng(derive_seed(params.seed, stream_id("tsne-init")));
  std::normal_distribution<double> init(0.0, 1e-4);
  Eigen::ArrayXd xs(nn), ys(nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    xs(i) = init(rng);
    ys(i) = init(rng);
  }
  xs -= xs.mean();
  ys -= ys.mean();

  Eigen::ArrayXd ux = Eigen::ArrayXd::Zero(nn), uy = Eigen::ArrayXd::Zero(nn);
  Eigen::ArrayXd kx = Eigen::ArrayXd::Ones(nn), ky = Eigen::ArrayXd::Ones(nn);
  Eigen::ArrayXd gx, gy;
  detail::TsneWorkspace ws;

  Embedding2D out;
  out.params = params;
  const bool has_late_phase = params.n_iter > params.exaggeration_iters;
  double best_kl = std::numeric_limits<double>::infinity();
  Eigen::ArrayXd best_x = xs, best_y = ys;

  auto update_gains = [](Eigen::ArrayXd& gains, const Eigen::ArrayXd& g, const Eigen::ArrayXd& u) {
    gains = ((g > 0) != (u > 0)).select(gains + 0.2, gains * 0.8).max(0.01);
  };

  for (int it = 0; it <= params.n_iter; ++it) {
    detail::student_kernel(xs, ys, ws);
    if (it % params.kl_every == 0 || it == params.n_iter) {
      const double kl = detail::kl_divergence(p, ws, plogp);
      out.kl_trace.push_back({it, kl});
      const bool eligible = has_late_phase ? it >= params.exaggeration_iters : true;
      if (eligible && kl < best_kl) {
        best_kl = kl;
        best_x = xs;
        best_y = ys;
        out.best_iteration = it;
      }
    }
    if (it == params.n_iter) break;

    const bool early = it < params.exaggeration_iters;
    detail::gradient(p, early ? params.early_exaggeration : 1.0, xs, ys, ws, gx, gy);
    if (!gx.allFinite() || !gy.allFinite())
      throw Error(ErrorCode::kNumericalFailure, "non-finite t-SNE gradient at iteration " + std::to_string(it));
    const double momentum = early ? params.momentum_early : params.momentum_late;
    update_gains(kx, gx, ux);
    update_gains(ky, gy, uy);
    ux = momentum * ux - params.learning_rate * kx * gx;
    uy = momentum * uy - params.learning_rate * ky * gy;
    xs += ux;
    ys += uy;
    xs -= xs.mean();
    ys -= ys.mean();
  }

  out.coords.resize(nn, 2);
  out.coords.col(0) = best_x.matrix();
  out.coords.col(1) = best_y.matrix();
  out.final_kl = best_kl;
  return out;
}

inline double kl_at_iteration(const Embedding2D& e, int iteration) {
  for (const auto& r : e.kl_trace)
    if (r.iteration == iteration) return r.kl;
  throw Error(ErrorCode::kArgument, "no KL recorded at iteration " + std::to_string(iteration));
}

}  // namespace cogsub
