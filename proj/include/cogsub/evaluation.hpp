#pragma once

// Partition agreement and separation scores used to check results against a
// planted ground truth.

#include "cogsub/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

namespace cogsub {

/// Adjusted Rand index between two labelings of the same samples. Every
/// distinct value (including a noise marker) is treated as its own group.
inline double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "ARI needs labelings of equal length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1;
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1;  // both labelings trivial
  return (index - expected) / (max_index - expected);
}

/// Mean silhouette coefficient with Euclidean distances. Samples in a
/// singleton group contribute 0.
inline double silhouette(const Matrix& x, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw Error(ErrorCode::kShape, "silhouette: label count differs from row count");
  std::map<int, std::size_t> group_size;
  for (int l : labels) group_size[l] += 1;
  if (group_size.size() < 2) return 0;
  std::vector<double> s(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    std::map<int, double> sum;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
    }
    const std::size_t own = group_size[labels[i]];
    if (own < 2) return;
    const double a = sum[labels[i]] / static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, total] : sum)
      if (l != labels[i]) b = std::min(b, total / static_cast<double>(group_size[l]));
    const double m = std::max(a, b);
    s[i] = m > 0 ? (b - a) / m : 0;
  });
  double total = 0;
  for (double v : s) total += v;
  return total / static_cast<double>(n);
}

}  // namespace cogsub
