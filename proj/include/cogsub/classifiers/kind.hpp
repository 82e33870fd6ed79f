#pragma once

#include "cogsub/common.hpp"

#include <array>
#include <optional>
#include <string_view>
#include <variant>

namespace cogsub::classifiers {

enum class ClassifierTag { LDA, QDA, NB, KNN, SLI, SRBF, RF };

inline constexpr std::array<ClassifierTag, 7> kAllTags = {
    ClassifierTag::LDA, ClassifierTag::QDA, ClassifierTag::NB, ClassifierTag::KNN,
    ClassifierTag::SLI, ClassifierTag::SRBF, ClassifierTag::RF};

inline constexpr std::string_view to_string(ClassifierTag t) noexcept {
  constexpr std::array<std::string_view, 7> names = {"LDA", "QDA", "NB", "KNN", "SLI", "SRBF", "RF"};
  return names[static_cast<std::size_t>(t)];
}

inline std::optional<ClassifierTag> parse_tag(std::string_view s) noexcept {
  for (auto t : kAllTags)
    if (to_string(t) == s) return t;
  if (s == "kNN") return ClassifierTag::KNN;
  return std::nullopt;
}

// Covariance shrinkage: S + shrinkage * trace(S)/p * I.
struct LdaParams {
  double shrinkage = 1e-6;
};
struct QdaParams {
  double shrinkage = 1e-6;
};
// Per-feature variances are floored at var_floor * (largest feature variance).
struct NbParams {
  double var_floor = 1e-9;
};
struct KnnParams {
  int k = 5;
};
struct LinearSvmParams {
  double c = 1.0;
  double tol = 1e-3;
  int max_epochs = 10000;
};
// gamma <= 0 selects 1 / n_features.
struct RbfSvmParams {
  double c = 1.0;
  double gamma = 0.0;
  double tol = 1e-3;
  int max_epochs = 10000;
};
// max_features <= 0 selects ceil(sqrt(n_features)).
struct ForestParams {
  int n_trees = 100;
  int min_leaf = 1;
  int max_features = 0;
};

// Alternative order mirrors ClassifierTag.
using Hyperparams = std::variant<LdaParams, QdaParams, NbParams, KnnParams, LinearSvmParams,
                                 RbfSvmParams, ForestParams>;

struct ClassifierKind {
  Hyperparams params;

  ClassifierTag tag() const noexcept { return static_cast<ClassifierTag>(params.index()); }

  static ClassifierKind defaults(ClassifierTag t) {
    switch (t) {
      case ClassifierTag::LDA: return {LdaParams{}};
      case ClassifierTag::QDA: return {QdaParams{}};
      case ClassifierTag::NB: return {NbParams{}};
      case ClassifierTag::KNN: return {KnnParams{}};
      case ClassifierTag::SLI: return {LinearSvmParams{}};
      case ClassifierTag::SRBF: return {RbfSvmParams{}};
      case ClassifierTag::RF: return {ForestParams{}};
    }
    throw Error(ErrorCode::kConfig, "unknown classifier tag");
  }
};

inline int to_sign(Label l) noexcept { return l == Label::MCI ? 1 : -1; }

// Every model reports a real-valued score; positive means MCI. Ties (0) go to CN.
inline Label label_from_score(double s) noexcept { return s > 0.0 ? Label::MCI : Label::CN; }

}  // namespace cogsub::classifiers
