#pragma once

#include "cogsub/classifiers/kind.hpp"

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

namespace cogsub::classifiers {

/// Majority vote over the k nearest training rows (Euclidean). Equal
/// distances are ordered by training index; an even vote goes to CN.
class KnnModel {
 public:
  static KnnModel fit(const KnnParams& params, const Matrix& x, std::span<const Label> y) {
    if (params.k < 1) throw Error(ErrorCode::kConfig, "kNN needs k >= 1");
    KnnModel m;
    m.train_ = x;
    m.labels_.assign(y.begin(), y.end());
    m.k_ = std::min<std::size_t>(static_cast<std::size_t>(params.k), m.labels_.size());
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    Eigen::ArrayXd d = Eigen::ArrayXd::Zero(train_.rows());
    for (Eigen::Index j = 0; j < train_.cols(); ++j) d += (train_.col(j).array() - row(j)).square();
    // Single pass keeping the k best in a sorted buffer. Rows arrive in index
    // order, so an equal distance never displaces an earlier row.
    std::vector<std::pair<double, std::size_t>> best;
    best.reserve(k_ + 1);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (best.size() == k_ && !(d(i) < best.back().first)) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), d(i),
                                  [](double v, const std::pair<double, std::size_t>& e) { return v < e.first; });
      best.insert(pos, {d(i), static_cast<std::size_t>(i)});
      if (best.size() > k_) best.pop_back();
    }
    int votes = 0;
    for (const auto& [dist, i] : best) votes += to_sign(labels_[i]);
    return static_cast<double>(votes);
  }

 private:
  Eigen::MatrixXd train_;  // column-major: distances accumulate per feature
  std::vector<Label> labels_;
  std::size_t k_ = 5;
};

}  // namespace cogsub::classifiers
