#pragma once

// Random forest of fully grown Gini trees on bootstrap samples.
//
// A bootstrap sample is represented as per-row multiplicities. Each tree keeps
// one row list per feature, sorted by that feature; a node owns the same
// contiguous segment in every list, and a split stably partitions all lists.
// Split search is then a single linear scan per candidate feature.

#include "cogsub/classifiers/kind.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace cogsub::classifiers {

/// Training rows sorted by each feature; shared by all trees of a forest.
struct PresortedColumns {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor> values;  // n x p
  std::vector<std::vector<std::uint32_t>> order;                                  // per feature

  explicit PresortedColumns(const Matrix& x) : values(x), order(static_cast<std::size_t>(x.cols())) {
    for (std::size_t f = 0; f < order.size(); ++f) {
      auto& o = order[f];
      o.resize(static_cast<std::size_t>(x.rows()));
      std::iota(o.begin(), o.end(), 0u);
      const double* col = values.col(static_cast<Eigen::Index>(f)).data();
      std::stable_sort(o.begin(), o.end(), [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
  }
};

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;
    int right = -1;
    Label label = Label::CN;
  };

  /// `weight[i]` is the multiplicity of training row i in this tree's sample.
  static DecisionTree grow(const PresortedColumns& data, std::span<const Label> y,
                           std::span<const std::uint32_t> weight, std::size_t max_features,
                           std::size_t min_leaf, std::mt19937_64& rng) {
    const std::size_t p = data.order.size();
    max_features = std::clamp<std::size_t>(max_features, 1, p);
    const double min_leaf_w = static_cast<double>(std::max<std::size_t>(min_leaf, 1));

    // In-bag rows per feature, in sorted order, with value, weight and label
    // stored inline so scans and partitions stay sequential in memory.
    struct Entry {
      double value;
      std::uint32_t row;
      std::uint32_t weight;
      bool mci;
    };
    std::vector<std::vector<Entry>> lists(p);
    std::size_t m = 0;
    for (auto w : weight) m += w > 0;
    for (std::size_t f = 0; f < p; ++f) {
      const double* col = data.values.col(static_cast<Eigen::Index>(f)).data();
      lists[f].resize(m);
      Entry* out = lists[f].data();
      for (auto r : data.order[f])
        if (weight[r] > 0) *out++ = {col[r], r, weight[r], y[r] == Label::MCI};
    }
    std::vector<Entry> scratch(m);
    std::vector<std::uint8_t> goes_left(y.size(), 0);
    std::vector<std::size_t> features(p);
    std::iota(features.begin(), features.end(), std::size_t{0});

    DecisionTree tree;
    struct Task {
      std::size_t begin, end;
      int node;
      double w_cn, w_mci;  // class weights inside the segment
    };
    std::vector<Task> stack;
    tree.nodes_.push_back({});
    {
      double w_cn = 0, w_mci = 0;
      if (p > 0)
        for (const auto& e : lists[0]) (e.mci ? w_mci : w_cn) += e.weight;
      stack.push_back({0, m, 0, w_cn, w_mci});
    }

    while (!stack.empty()) {
      const Task task = stack.back();
      stack.pop_back();
      const double w_cn = task.w_cn, w_mci = task.w_mci;
      tree.nodes_[static_cast<std::size_t>(task.node)].label = w_mci > w_cn ? Label::MCI : Label::CN;
      const double total = w_cn + w_mci;
      if (w_cn == 0 || w_mci == 0 || total < 2 * min_leaf_w) continue;

      for (std::size_t f = 0; f < max_features; ++f) {
        std::uniform_int_distribution<std::size_t> pick(f, p - 1);
        std::swap(features[f], features[pick(rng)]);
      }

      // Maximizing the children's sum of (cn^2 + mci^2) / size minimizes
      // weighted Gini. Candidates are compared by cross-multiplication, so the
      // scan divides only when the running best improves.
      const double parent_score = (w_cn * w_cn + w_mci * w_mci) / total;
      double best_score = parent_score + 1e-12 * total;
      int best_feature = -1;
      std::size_t best_split = 0;
      double best_threshold = 0, best_l_cn = 0, best_l_mci = 0;
      for (std::size_t fi = 0; fi < max_features; ++fi) {
        const std::size_t f = features[fi];
        const Entry* list = lists[f].data();
        if (list[task.begin].value == list[task.end - 1].value) continue;
        double l_cn = 0, l_mci = 0;
        std::size_t f_split = 0;
        double f_l_cn = 0, f_l_mci = 0;
        for (std::size_t s = task.begin; s + 1 < task.end; ++s) {
          const Entry& e = list[s];
          const double w = e.weight;
          l_mci += e.mci ? w : 0.0;
          l_cn += e.mci ? 0.0 : w;
          const double nl = l_cn + l_mci, nr = total - nl;
          const double r_cn = w_cn - l_cn, r_mci = w_mci - l_mci;
          const double num = (l_cn * l_cn + l_mci * l_mci) * nr + (r_cn * r_cn + r_mci * r_mci) * nl;
          const double den = nl * nr;
          if (num > best_score * den && e.value != list[s + 1].value && nl >= min_leaf_w && nr >= min_leaf_w) {
            best_score = num / den;
            f_split = s + 1;
            f_l_cn = l_cn;
            f_l_mci = l_mci;
          }
        }
        if (f_split > 0) {
          best_feature = static_cast<int>(f);
          best_split = f_split;
          best_l_cn = f_l_cn;
          best_l_mci = f_l_mci;
          const double v = list[f_split - 1].value, next = list[f_split].value;
          double mid = v + 0.5 * (next - v);
          if (!(mid < next)) mid = v;
          best_threshold = mid;
        }
      }
      if (best_feature < 0) continue;

      const auto& split_list = lists[static_cast<std::size_t>(best_feature)];
      if (p > 1)
        for (std::size_t s = task.begin; s < task.end; ++s) goes_left[split_list[s].row] = s < best_split;
      for (std::size_t f = 0; f < p; ++f) {
        if (f == static_cast<std::size_t>(best_feature)) continue;
        auto& list = lists[f];
        std::size_t li = task.begin, ri = 0;
        for (std::size_t s = task.begin; s < task.end; ++s) {
          // Branch-free: labels are noisy, so this branch would mispredict often.
          const Entry e = list[s];
          const std::size_t gl = goes_left[e.row];
          list[li] = e;
          scratch[ri] = e;
          li += gl;
          ri += 1 - gl;
        }
        std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(ri),
                  list.begin() + static_cast<std::ptrdiff_t>(li));
      }

      const int left = static_cast<int>(tree.nodes_.size());
      tree.nodes_.push_back({});
      tree.nodes_.push_back({});
      auto& node = tree.nodes_[static_cast<std::size_t>(task.node)];
      node.feature = best_feature;
      node.threshold = best_threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({best_split, task.end, left + 1, w_cn - best_l_cn, w_mci - best_l_mci});
      stack.push_back({task.begin, best_split, left, best_l_cn, best_l_mci});
    }
    return tree;
  }

  Label predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    std::size_t at = 0;
    while (nodes_[at].feature >= 0) {
      const auto& nd = nodes_[at];
      at = static_cast<std::size_t>(row(nd.feature) <= nd.threshold ? nd.left : nd.right);
    }
    return nodes_[at].label;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

class ForestModel {
 public:
  static ForestModel fit(const ForestParams& params, const Matrix& x, std::span<const Label> y,
                         std::uint64_t seed) {
    if (params.n_trees < 1) throw Error(ErrorCode::kConfig, "random forest needs at least one tree");
    const auto n = static_cast<std::size_t>(x.rows());
    const auto p = static_cast<std::size_t>(x.cols());
    const std::size_t mtry = params.max_features > 0
                                 ? static_cast<std::size_t>(params.max_features)
                                 : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
    const PresortedColumns data(x);
    ForestModel m;
    m.trees_.reserve(static_cast<std::size_t>(params.n_trees));
    std::vector<std::uint32_t> weight(n);
    for (int t = 0; t < params.n_trees; ++t) {
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      std::fill(weight.begin(), weight.end(), 0u);
      for (std::size_t d = 0; d < n; ++d) ++weight[draw(rng)];
      m.trees_.push_back(
          DecisionTree::grow(data, y, weight, mtry, static_cast<std::size_t>(params.min_leaf), rng));
    }
    return m;
  }

  double score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    int votes = 0;
    for (const auto& t : trees_) votes += to_sign(t.predict(row));
    return static_cast<double>(votes);
  }

  std::size_t n_trees() const noexcept { return trees_.size(); }

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace cogsub::classifiers
