#pragma once

// Per-cluster CN vs MCI characterization: rank tests and effect sizes per
// feature, the domains carrying large effects, and the resulting subtype.

#include "cogsub/cohort.hpp"
#include "cogsub/segmentation.hpp"
#include "cogsub/selection.hpp"
#include "cogsub/statistics.hpp"

#include <json.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace cogsub {

struct FeatureStat {
  std::string feature_id;
  Domain domain = Domain::A;
  double u = 0;  // for the CN sample
  double p_value = 1;
  double p_holm = 1;
  bool significant = false;
  double d = 0;  // CN minus MCI
  stats::EffectBand band = stats::EffectBand::kNegligible;
};

struct ClusterProfile {
  int cluster_id = 0;
  std::size_t n_cn = 0, n_mci = 0;
  std::vector<FeatureStat> stats;
  std::vector<std::string> significant_features;
  std::vector<std::string> large_effect_features;
  DomainSet affected_domains;
  std::string subtype;
};

/// Multi-domain iff two or more affected domains; amnestic iff memory is among
/// them; no affected domain at all is "indeterminate".
inline std::string subtype_label(const DomainSet& affected) {
  if (affected.empty()) return "indeterminate";
  const std::string memory = affected.count(Domain::M) ? "amnestic" : "non-amnestic";
  return memory + (affected.size() >= 2 ? " multi-domain" : " single-domain");
}

/// Tests CN vs MCI within one cluster on the masked features. d is computed
/// for every feature, but only significant large effects count.
inline ClusterProfile characterize_cluster(const CohortDataset& ds, const ClusterAssignment& assignment, int cluster_id,
                                           const FeatureMask& mask, double alpha = 0.05) {
  if (mask.size() != ds.n_features()) throw Error(ErrorCode::kShape, "feature mask length differs from schema");
  if (assignment.cluster_of.size() != ds.n_samples())
    throw Error(ErrorCode::kShape, "cluster assignment length differs from sample count");
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorCode::kConfig, "alpha must lie in (0, 1)");
  std::vector<std::size_t> cn, mci;
  for (std::size_t i = 0; i < ds.n_samples(); ++i)
    if (assignment.cluster_of[i] == cluster_id) (ds.labels()[i] == Label::MCI ? mci : cn).push_back(i);
  ClusterProfile prof;
  prof.cluster_id = cluster_id;
  prof.n_cn = cn.size();
  prof.n_mci = mci.size();
  if (cn.size() < 2 || mci.size() < 2)
    throw Error(ErrorCode::kInsufficientSamples, "cluster C" + std::to_string(cluster_id + 1) + " has " +
                                                     std::to_string(cn.size()) + " CN and " +
                                                     std::to_string(mci.size()) + " MCI samples; need 2 of each");
  const auto cols = selected_indices(mask);
  prof.stats.resize(cols.size());
  parallel_for(cols.size(), [&](std::size_t k) {
    const std::size_t j = cols[k];
    std::vector<double> a, b;
    for (std::size_t i : cn) a.push_back(ds.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t i : mci) b.push_back(ds.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    auto& st = prof.stats[k];
    st.feature_id = ds.descriptors()[j].id;
    st.domain = ds.descriptors()[j].domain;
    const auto mw = stats::mann_whitney_u(a, b);
    st.u = mw.u;
    st.p_value = mw.p_value;
    st.significant = mw.p_value < alpha;
    st.d = stats::cohens_d(a, b);
    st.band = stats::interpret_effect(st.d);
  });
  std::vector<double> p;
  for (const auto& st : prof.stats) p.push_back(st.p_value);
  const auto holm = stats::holm_adjust(p);
  for (std::size_t k = 0; k < prof.stats.size(); ++k) {
    auto& st = prof.stats[k];
    st.p_holm = holm[k];
    if (!st.significant) continue;
    prof.significant_features.push_back(st.feature_id);
    if (st.band == stats::EffectBand::kLarge) {
      prof.large_effect_features.push_back(st.feature_id);
      prof.affected_domains.insert(st.domain);
    }
  }
  prof.subtype = subtype_label(prof.affected_domains);
  return prof;
}

struct GradationScore {
  int cluster_id = 0;
  double rank_biserial = 0;
  double p_value = 1;
};

/// Projects a cluster onto its first principal axis in the embedding and
/// measures how well the projection orders CN against MCI.
inline GradationScore gradation_summary(const Matrix& coords, const ClusterAssignment& assignment,
                                        std::span<const Label> labels, int cluster_id) {
  if (cluster_id == kNoise) throw Error(ErrorCode::kArgument, "gradation is undefined for noise");
  const auto members = assignment.members(cluster_id);
  GradationScore out;
  out.cluster_id = cluster_id;
  if (members.size() < 2) return out;
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(members.size()), 2);
  for (std::size_t k = 0; k < members.size(); ++k) pts.row(static_cast<Eigen::Index>(k)) = coords.row(static_cast<Eigen::Index>(members[k]));
  const Eigen::RowVector2d centre = pts.colwise().mean();
  pts.rowwise() -= centre;
  const Eigen::Matrix2d cov = pts.transpose() * pts;
  if (cov.trace() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Eigen::Vector2d axis = eig.eigenvectors().col(1);
  if (std::abs(axis(0)) >= std::abs(axis(1)) ? axis(0) < 0 : axis(1) < 0) axis = -axis;
  const Eigen::VectorXd proj = pts * axis;
  std::vector<double> cn, mci;
  for (std::size_t k = 0; k < members.size(); ++k)
    (labels[members[k]] == Label::MCI ? mci : cn).push_back(proj(static_cast<Eigen::Index>(k)));
  if (cn.empty() || mci.empty()) return out;
  const auto mw = stats::mann_whitney_u(cn, mci);
  out.rank_biserial = stats::rank_biserial(mw.u, cn.size(), mci.size());
  out.p_value = mw.p_value;
  return out;
}

inline nlohmann::ordered_json profile_to_json(const ClusterProfile& prof, const ClusterCensus* census = nullptr) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["cluster"] = "C" + std::to_string(prof.cluster_id + 1);
  j["cluster_index"] = prof.cluster_id;
  j["n_cn"] = prof.n_cn;
  j["n_mci"] = prof.n_mci;
  if (census) j["n_total"] = census->total;
  ordered_json feats = ordered_json::array();
  for (const auto& st : prof.stats) {
    ordered_json f;
    f["feature"] = st.feature_id;
    f["domain"] = std::string(1, to_char(st.domain));
    f["U"] = st.u;
    f["p_value"] = st.p_value;
    f["p_holm"] = st.p_holm;
    f["significant"] = st.significant;
    if (std::isfinite(st.d)) f["d"] = st.d;
    else f["d"] = st.d > 0 ? "inf" : "-inf";
    f["effect"] = std::string(stats::to_string(st.band));
    feats.push_back(f);
  }
  j["features"] = feats;
  j["significant_features"] = prof.significant_features;
  j["large_effect_features"] = prof.large_effect_features;
  std::vector<std::string> doms;
  for (Domain d : prof.affected_domains) doms.emplace_back(1, to_char(d));
  j["affected_domains"] = doms;
  j["subtype"] = prof.subtype;
  return j;
}

/// One line per cluster: "C1  F8 (M), F12 (V), ...".
inline std::string large_effect_table(const std::vector<ClusterProfile>& profiles, const Schema& schema) {
  std::ostringstream out;
  out << "Subgroup  Features with large effect size\n";
  for (const auto& prof : profiles) {
    out << "C" << prof.cluster_id + 1 << "        ";
    if (prof.large_effect_features.empty()) out << "(none)";
    for (std::size_t k = 0; k < prof.large_effect_features.size(); ++k) {
      const auto& id = prof.large_effect_features[k];
      char dom = '?';
      for (const auto& d : schema)
        if (d.id == id) dom = to_char(d.domain);
      out << (k ? ", " : "") << id << " (" << dom << ")";
    }
    out << "  [" << prof.subtype << "]\n";
  }
  return out.str();
}

}  // namespace cogsub
