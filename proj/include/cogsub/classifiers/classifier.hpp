#pragma once

// Shared front for the seven classifiers. Callers (cross-validation,
// wrapper selection) only see ClassifierKind, FittedModel, fit and predict.

#include "cogsub/classifiers/discriminant.hpp"
#include "cogsub/classifiers/kind.hpp"
#include "cogsub/classifiers/knn.hpp"
#include "cogsub/classifiers/random_forest.hpp"
#include "cogsub/classifiers/svm.hpp"

#include <span>
#include <variant>
#include <vector>

namespace cogsub::classifiers {

using ModelState = std::variant<LdaModel, QdaModel, NaiveBayesModel, KnnModel, LinearSvmModel,
                                RbfSvmModel, ForestModel>;

struct FittedModel {
  ClassifierKind kind;
  std::size_t n_features = 0;
  ModelState state;
};

inline FittedModel fit(const ClassifierKind& kind, const Matrix& x, std::span<const Label> y,
                       std::uint64_t seed = 0) {
  if (x.cols() == 0) throw Error(ErrorCode::kEmptyFeatures, "cannot fit a classifier on zero features");
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::kShape, "feature rows and label count differ");
  std::size_t n_mci = 0;
  for (Label l : y) n_mci += l == Label::MCI;
  if (n_mci < 1 || n_mci == y.size())
    throw Error(ErrorCode::kDegenerateLabels, "training labels contain a single class");
  auto state = std::visit(
      [&](const auto& p) -> ModelState {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, LdaParams>) return LdaModel::fit(p, x, y);
        else if constexpr (std::is_same_v<P, QdaParams>) return QdaModel::fit(p, x, y);
        else if constexpr (std::is_same_v<P, NbParams>) return NaiveBayesModel::fit(p, x, y);
        else if constexpr (std::is_same_v<P, KnnParams>) return KnnModel::fit(p, x, y);
        else if constexpr (std::is_same_v<P, LinearSvmParams>) return LinearSvmModel::fit(p, x, y);
        else if constexpr (std::is_same_v<P, RbfSvmParams>) return RbfSvmModel::fit(p, x, y);
        else return ForestModel::fit(p, x, y, seed);
      },
      kind.params);
  return {kind, static_cast<std::size_t>(x.cols()), std::move(state)};
}

inline std::vector<double> decision_scores(const FittedModel& model, const Matrix& x) {
  if (x.rows() > 0 && static_cast<std::size_t>(x.cols()) != model.n_features)
    throw Error(ErrorCode::kShape, "model expects " + std::to_string(model.n_features) +
                                       " features, got " + std::to_string(x.cols()));
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  std::visit(
      [&](const auto& m) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = m.score(x.row(i));
      },
      model.state);
  return out;
}

inline std::vector<Label> predict(const FittedModel& model, const Matrix& x) {
  auto scores = decision_scores(model, x);
  std::vector<Label> out(scores.size());
  std::transform(scores.begin(), scores.end(), out.begin(), label_from_score);
  return out;
}

}  // namespace cogsub::classifiers
