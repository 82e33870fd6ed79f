#pragma once

// Two-sample statistics used by the profile stage.

#include "cogsub/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

namespace cogsub::stats {

struct MannWhitneyResult {
  double u = 0;  // U for the first sample: pairs with a > b, ties count 1/2
  double p_value = 1;
};

namespace detail {

// Midranks (1-based) of the pooled sample, plus sum of t^3 - t over tie groups.
inline std::vector<double> midranks(std::span<const double> pooled, double* tie_term) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> rank(n);
  double ties = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return rank;
}

inline void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kArgument, "Mann-Whitney needs two nonempty samples");
}

}  // namespace detail

/// Two-sided p from the normal approximation with tie-corrected variance and a
/// 0.5 continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  detail::require_nonempty(a, b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double ties = 0;
  const auto rank = detail::midranks(pooled, &ties);
  const double ra = std::accumulate(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
  MannWhitneyResult res;
  res.u = ra - na * (na + 1) / 2;
  const double n = na + nb;
  const double var = na * nb / 12.0 * ((n + 1) - ties / (n * (n - 1)));
  if (!(var > 0)) {
    res.u = na * nb / 2;
    res.p_value = 1;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u - na * nb / 2) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

/// Exact two-sided p from the permutation distribution of U. Valid only
/// without ties; intended for small samples (n_a * n_b <= 400).
inline MannWhitneyResult mann_whitney_exact(std::span<const double> a, std::span<const double> b) {
  detail::require_nonempty(a, b);
  const std::size_t na = a.size(), nb = b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double ties = 0;
  const auto rank = detail::midranks(pooled, &ties);
  if (ties > 0) throw Error(ErrorCode::kArgument, "exact Mann-Whitney requires untied data");
  const double ra = std::accumulate(rank.begin(), rank.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
  const auto u = static_cast<std::size_t>(std::llround(ra - static_cast<double>(na * (na + 1) / 2)));

  // count[i][j][u]: arrangements of i a's and j b's with statistic u, built up
  // one sample at a time; only the j dimension is kept per layer.
  const std::size_t umax = na * nb;
  std::vector<std::vector<double>> prev(nb + 1, std::vector<double>(umax + 1, 0.0)), cur = prev;
  for (std::size_t j = 0; j <= nb; ++j) prev[j][0] = 1;  // i = 0
  for (std::size_t i = 1; i <= na; ++i) {
    for (auto& row : cur) std::fill(row.begin(), row.end(), 0.0);
    cur[0][0] = 1;
    for (std::size_t j = 1; j <= nb; ++j)
      for (std::size_t v = 0; v <= i * j; ++v)
        cur[j][v] = (v >= j ? prev[j][v - j] : 0.0) + cur[j - 1][v];
    std::swap(prev, cur);
  }
  const auto& dist = prev[nb];
  const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
  double lower = 0, upper = 0;
  for (std::size_t v = 0; v <= umax; ++v) {
    if (v <= u) lower += dist[v];
    if (v >= u) upper += dist[v];
  }
  MannWhitneyResult res;
  res.u = static_cast<double>(u);
  res.p_value = std::min(1.0, 2 * std::min(lower, upper) / total);
  return res;
}

/// Rank-biserial correlation 2U/(n_a n_b) - 1 for the U of the first sample.
inline double rank_biserial(double u, std::size_t na, std::size_t nb) {
  return 2 * u / (static_cast<double>(na) * static_cast<double>(nb)) - 1;
}

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_variance(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

/// Standardized mean difference (mean(a) - mean(b)) / pooled sd. A zero pooled
/// sd yields 0 for equal means and a signed infinity otherwise.
inline double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::kArgument, "Cohen's d needs at least 2 values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double diff = mean(a) - mean(b);
  const double pooled =
      std::sqrt(((na - 1) * sample_variance(a) + (nb - 1) * sample_variance(b)) / (na + nb - 2));
  if (pooled == 0) {
    if (diff == 0) return 0;
    return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return diff / pooled;
}

enum class EffectBand { kNegligible, kSmall, kMedium, kLarge };

inline constexpr std::string_view to_string(EffectBand b) noexcept {
  switch (b) {
    case EffectBand::kNegligible: return "negligible";
    case EffectBand::kSmall: return "small";
    case EffectBand::kMedium: return "medium";
    case EffectBand::kLarge: return "large";
  }
  return "negligible";
}

inline EffectBand interpret_effect(double d) noexcept {
  const double m = std::abs(d);
  if (m <= 0.2) return EffectBand::kNegligible;
  if (m <= 0.5) return EffectBand::kSmall;
  if (m <= 0.8) return EffectBand::kMedium;
  return EffectBand::kLarge;  // includes the infinite sentinel
}

/// Holm step-down adjusted p-values, returned in input order.
inline std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> out(m);
  double running = 0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[order[k]]));
    out[order[k]] = running;
  }
  return out;
}

}  // namespace cogsub::stats
