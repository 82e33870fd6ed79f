#pragma once

#include "cogsub/classifiers/classifier.hpp"

#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace cogsub::classifiers {

struct CvResult {
  double accuracy = 0;         // mean of fold accuracies
  double pooled_accuracy = 0;  // total correct / n
  std::vector<double> fold_accuracies;
  std::vector<int> fold_assignment;
};

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// the second class continuing where the first stopped, so per-class and
/// total fold sizes both differ by at most one.
inline std::vector<int> stratified_folds(std::span<const Label> y, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kConfig, "fold count must be >= 2");
  std::vector<int> folds(y.size(), -1);
  std::mt19937_64 rng(derive_seed(seed, stream_id("folds")));
  int next = 0;
  for (Label cls : {Label::CN, Label::MCI}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == cls) members.push_back(i);
    if (members.size() < static_cast<std::size_t>(k))
      throw Error(ErrorCode::kStratification,
                  "class " + std::string(to_string(cls)) + " has " + std::to_string(members.size()) +
                      " samples, fewer than " + std::to_string(k) + " folds");
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) {
      folds[i] = next;
      next = (next + 1) % k;
    }
  }
  return folds;
}

/// Cross-validates with a caller-supplied fold assignment. Fold f trains with
/// seed derive_seed(seed, f), so results do not depend on execution order.
inline CvResult cross_validate_with_folds(const ClassifierKind& kind, const Matrix& x,
                                          std::span<const Label> y, std::span<const int> folds, int k,
                                          std::uint64_t seed) {
  if (folds.size() != y.size() || static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::kShape, "fold assignment, labels and rows must have equal length");
  if (x.cols() == 0) throw Error(ErrorCode::kEmptyFeatures, "cannot fit a classifier on zero features");
  std::vector<std::size_t> correct(static_cast<std::size_t>(k), 0), sizes(static_cast<std::size_t>(k), 0);
  // The RBF kernel is computed once over all samples and shared by the folds.
  const auto* rbf = std::get_if<RbfSvmParams>(&kind.params);
  const Matrix gram = rbf ? RbfSvmModel::gram_matrix(x, rbf->gamma) : Matrix();
  parallel_for(static_cast<std::size_t>(k), [&](std::size_t f) {
    std::vector<Eigen::Index> train, test;
    for (std::size_t i = 0; i < y.size(); ++i)
      (folds[i] == static_cast<int>(f) ? test : train).push_back(static_cast<Eigen::Index>(i));
    sizes[f] = test.size();
    if (test.empty()) return;
    std::vector<Label> ytr(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) ytr[i] = y[static_cast<std::size_t>(train[i])];
    if (rbf) {
      std::vector<std::uint8_t> in_train(y.size(), 0);
      for (auto i : train) in_train[static_cast<std::size_t>(i)] = 1;
      const auto model = RbfSvmModel::fit_gram(*rbf, gram, y, in_train);
      const auto scores = model.gram_scores(gram, test);
      std::size_t ok = 0;
      for (std::size_t i = 0; i < test.size(); ++i) ok += label_from_score(scores[i]) == y[static_cast<std::size_t>(test[i])];
      correct[f] = ok;
      return;
    }
    Matrix xtr = x(train, Eigen::all);
    Matrix xte = x(test, Eigen::all);
    auto model = fit(kind, xtr, ytr, derive_seed(seed, f));
    auto pred = predict(model, xte);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < test.size(); ++i) ok += pred[i] == y[static_cast<std::size_t>(test[i])];
    correct[f] = ok;
  });
  CvResult res;
  res.fold_assignment.assign(folds.begin(), folds.end());
  std::size_t total_ok = 0;
  for (std::size_t f = 0; f < correct.size(); ++f) {
    if (sizes[f] == 0) throw Error(ErrorCode::kStratification, "fold " + std::to_string(f) + " is empty");
    res.fold_accuracies.push_back(static_cast<double>(correct[f]) / static_cast<double>(sizes[f]));
    total_ok += correct[f];
  }
  res.accuracy = std::accumulate(res.fold_accuracies.begin(), res.fold_accuracies.end(), 0.0) /
                 static_cast<double>(k);
  res.pooled_accuracy = static_cast<double>(total_ok) / static_cast<double>(y.size());
  return res;
}

inline CvResult cross_validate(const ClassifierKind& kind, const Matrix& x, std::span<const Label> y,
                               int k = 10, std::uint64_t seed = 0) {
  auto folds = stratified_folds(y, k, seed);
  return cross_validate_with_folds(kind, x, y, folds, k, seed);
}

}  // namespace cogsub::classifiers
