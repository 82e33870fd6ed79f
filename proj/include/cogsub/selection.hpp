#pragma once

// Wrapper feature selection: sequential forward search per classifier, and
// the union of the per-classifier subsets.

#include "cogsub/classifiers/cross_validation.hpp"
#include "cogsub/cohort.hpp"

#include <json.hpp>

#include <limits>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace cogsub {

using FeatureMask = std::vector<bool>;

inline std::vector<std::size_t> selected_indices(const FeatureMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) out.push_back(j);
  return out;
}

inline std::size_t mask_size(const FeatureMask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

struct WrapperConfig {
  int k_folds = 10;
  std::uint64_t seed = 0;
  double min_gain = 0.001;
  std::size_t max_subset_size = 0;  // 0 = no limit
};

struct SelectionStep {
  std::size_t feature = 0;
  double accuracy = 0;
};

struct WrapperResult {
  FeatureMask mask;
  double accuracy = 0;  // pooled CV accuracy of the final subset
  double empty_accuracy = 0;  // majority-class rule on the same folds
  std::vector<SelectionStep> trace;
};

/// Pooled CV accuracy of predicting each test fold with its training fold's
/// majority class (ties to CN). This is the score of the empty subset.
inline double majority_rule_accuracy(std::span<const Label> y, std::span<const int> folds, int k) {
  std::size_t ok = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t cn = 0, mci = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (folds[i] != f) (y[i] == Label::MCI ? mci : cn) += 1;
    const Label guess = mci > cn ? Label::MCI : Label::CN;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (folds[i] == f) ok += y[i] == guess;
  }
  return static_cast<double>(ok) / static_cast<double>(y.size());
}

/// Greedy forward search. Every candidate in a round is scored on the same
/// fold assignment; the best one is accepted if it improves pooled accuracy
/// by more than min_gain. Equal scores go to the lower feature index.
inline WrapperResult wrapper_select(const classifiers::ClassifierKind& kind, const CohortDataset& ds,
                                    const WrapperConfig& cfg) {
  const std::size_t p = ds.n_features();
  const auto& y = ds.labels();
  const std::uint64_t seed = derive_seed(cfg.seed, stream_id(classifiers::to_string(kind.tag())));
  const auto folds = classifiers::stratified_folds(y, cfg.k_folds, seed);
  const std::size_t limit = cfg.max_subset_size == 0 ? p : std::min(cfg.max_subset_size, p);

  WrapperResult res;
  res.mask.assign(p, false);
  res.empty_accuracy = majority_rule_accuracy(y, folds, cfg.k_folds);
  res.accuracy = res.empty_accuracy;
  std::vector<std::size_t> chosen;
  while (chosen.size() < limit) {
    std::vector<std::size_t> candidates;
    for (std::size_t j = 0; j < p; ++j)
      if (!res.mask[j]) candidates.push_back(j);
    if (candidates.empty()) break;
    std::vector<double> score(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t c) {
      auto cols = chosen;
      cols.push_back(candidates[c]);
      const Matrix x = ds.features()(Eigen::all, std::vector<Eigen::Index>(cols.begin(), cols.end()));
      score[c] = classifiers::cross_validate_with_folds(kind, x, y, folds, cfg.k_folds, seed).pooled_accuracy;
    });
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
      if (score[c] > score[best]) best = c;
    if (!(score[best] - res.accuracy > cfg.min_gain)) break;
    chosen.push_back(candidates[best]);
    res.mask[candidates[best]] = true;
    res.accuracy = score[best];
    res.trace.push_back({candidates[best], score[best]});
  }
  return res;
}

/// Element-wise OR of one mask per classifier kind.
inline FeatureMask ensemble_consensus(const std::vector<std::pair<classifiers::ClassifierTag, FeatureMask>>& masks) {
  if (masks.empty()) throw Error(ErrorCode::kConfig, "consensus needs at least one classifier mask");
  std::set<classifiers::ClassifierTag> seen;
  FeatureMask out(masks.front().second.size(), false);
  for (const auto& [tag, mask] : masks) {
    if (!seen.insert(tag).second)
      throw Error(ErrorCode::kConfig, "duplicate classifier " + std::string(classifiers::to_string(tag)));
    if (mask.size() != out.size()) throw Error(ErrorCode::kShape, "classifier masks differ in length");
    for (std::size_t j = 0; j < mask.size(); ++j) out[j] = out[j] || mask[j];
  }
  return out;
}

struct ClassifierSelection {
  classifiers::ClassifierKind kind;
  WrapperResult result;
  double baseline_accuracy = 0;  // all features, same folds
};

struct SelectionConfig {
  WrapperConfig wrapper;
  std::vector<classifiers::ClassifierKind> kinds;  // empty = all seven with defaults
};

struct SelectionReport {
  std::vector<std::string> feature_ids;
  std::vector<ClassifierSelection> per_classifier;
  FeatureMask consensus;
};

inline SelectionReport run_ensemble_selection(const CohortDataset& ds, const SelectionConfig& cfg) {
  auto kinds = cfg.kinds;
  if (kinds.empty())
    for (auto tag : classifiers::kAllTags) kinds.push_back(classifiers::ClassifierKind::defaults(tag));
  SelectionReport rep;
  for (const auto& d : ds.descriptors()) rep.feature_ids.push_back(d.id);
  rep.per_classifier.resize(kinds.size());
  parallel_for(kinds.size(), [&](std::size_t c) {
    auto& out = rep.per_classifier[c];
    out.kind = kinds[c];
    out.result = wrapper_select(kinds[c], ds, cfg.wrapper);
    const std::uint64_t seed = derive_seed(cfg.wrapper.seed, stream_id(classifiers::to_string(kinds[c].tag())));
    const auto folds = classifiers::stratified_folds(ds.labels(), cfg.wrapper.k_folds, seed);
    out.baseline_accuracy = classifiers::cross_validate_with_folds(kinds[c], ds.features(), ds.labels(), folds,
                                                                   cfg.wrapper.k_folds, seed)
                                .pooled_accuracy;
  });
  std::vector<std::pair<classifiers::ClassifierTag, FeatureMask>> masks;
  for (const auto& s : rep.per_classifier) masks.emplace_back(s.kind.tag(), s.result.mask);
  rep.consensus = ensemble_consensus(masks);
  return rep;
}

// ---------------------------------------------------------------------------
// JSON: one column per classifier, one star list per classifier, the union,
// and accuracies.

inline nlohmann::ordered_json selection_report_to_json(const SelectionReport& rep) {
  using nlohmann::ordered_json;
  auto ids_of = [&](const FeatureMask& m) {
    std::vector<std::string> ids;
    for (std::size_t j : selected_indices(m)) ids.push_back(rep.feature_ids[j]);
    return ids;
  };
  ordered_json j;
  j["features"] = rep.feature_ids;
  ordered_json order = ordered_json::array(), selected = ordered_json::object(), acc = ordered_json::object(),
               base = ordered_json::object(), empty = ordered_json::object(), trace = ordered_json::object();
  for (const auto& s : rep.per_classifier) {
    const std::string tag(classifiers::to_string(s.kind.tag()));
    order.push_back(tag);
    selected[tag] = ids_of(s.result.mask);
    acc[tag] = s.result.accuracy;
    base[tag] = s.baseline_accuracy;
    empty[tag] = s.result.empty_accuracy;
    ordered_json steps = ordered_json::array();
    for (const auto& st : s.result.trace)
      steps.push_back({{"feature", rep.feature_ids[st.feature]}, {"accuracy", st.accuracy}});
    trace[tag] = steps;
  }
  j["classifier_order"] = order;
  j["selected"] = selected;
  j["consensus"] = ids_of(rep.consensus);
  ordered_json stars = ordered_json::object();
  for (std::size_t f = 0; f < rep.feature_ids.size(); ++f) {
    ordered_json row = ordered_json::array();
    for (const auto& s : rep.per_classifier) row.push_back(s.result.mask[f] ? "*" : "");
    stars[rep.feature_ids[f]] = row;
  }
  j["stars"] = stars;
  j["accuracy"] = acc;
  j["baseline_accuracy"] = base;
  j["empty_subset_accuracy"] = empty;
  j["trace"] = trace;
  return j;
}

/// Reads the classifier order, per-classifier selections and consensus back.
/// Features are matched by id against `feature_ids`.
inline SelectionReport selection_report_from_json(const nlohmann::json& j, const std::vector<std::string>& feature_ids) {
  SelectionReport rep;
  rep.feature_ids = feature_ids;
  std::map<std::string, std::size_t> index;
  for (std::size_t f = 0; f < feature_ids.size(); ++f) index[feature_ids[f]] = f;
  auto mask_of = [&](const nlohmann::json& ids) {
    FeatureMask m(feature_ids.size(), false);
    for (const auto& id : ids) {
      auto it = index.find(id.get<std::string>());
      if (it == index.end())
        throw Error(ErrorCode::kSchemaMismatch, "selection report names unknown feature " + id.get<std::string>());
      m[it->second] = true;
    }
    return m;
  };
  try {
    for (const auto& tag_text : j.at("classifier_order")) {
      const auto tag = classifiers::parse_tag(tag_text.get<std::string>());
      if (!tag) throw Error(ErrorCode::kParse, "selection report: unknown classifier " + tag_text.get<std::string>());
      ClassifierSelection s;
      s.kind = classifiers::ClassifierKind::defaults(*tag);
      s.result.mask = mask_of(j.at("selected").at(tag_text.get<std::string>()));
      if (j.contains("accuracy")) s.result.accuracy = j["accuracy"].value(tag_text.get<std::string>(), 0.0);
      if (j.contains("baseline_accuracy"))
        s.baseline_accuracy = j["baseline_accuracy"].value(tag_text.get<std::string>(), 0.0);
      rep.per_classifier.push_back(std::move(s));
    }
    rep.consensus = mask_of(j.at("consensus"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("selection report JSON: ") + e.what());
  }
  return rep;
}

}  // namespace cogsub
