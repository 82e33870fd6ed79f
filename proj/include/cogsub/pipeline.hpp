#pragma once

// End-to-end pipeline: generate or load a cohort, select features, embed,
// segment and profile. Every stage writes its outputs under one directory and
// the run manifest records their SHA-256 hashes.

#include "cogsub/cohort.hpp"
#include "cogsub/embedding.hpp"
#include "cogsub/evaluation.hpp"
#include "cogsub/profile.hpp"
#include "cogsub/segmentation.hpp"
#include "cogsub/selection.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef COGSUB_VERSION
#define COGSUB_VERSION "0.0.0"
#endif

namespace cogsub {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kInternalConsistency, "SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  fs::path cohort_csv;  // empty: generate a synthetic cohort (run) or read output_dir/cohort.csv
  fs::path schema_path;
  fs::path output_dir = "out";
  MissingPolicy missing = MissingPolicy::kDropRow;
  bool standardize = true;
  GeneratorConfig generator = three_subtype_config();
  SelectionConfig selection;
  TsneParams tsne;
  SegmentationConfig segmentation;
  double alpha = 0.05;
  bool skip_select = false;
};

inline std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view stage) {
  return derive_seed(cfg.seed, stream_id(stage));
}

namespace detail {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline DomainSet parse_domain_list(const json& j) {
  DomainSet out;
  for (const auto& c : j) {
    auto d = parse_domain(c.get<std::string>());
    if (!d) throw Error(ErrorCode::kConfig, "unknown domain code '" + c.get<std::string>() + "'");
    out.insert(*d);
  }
  return out;
}

inline classifiers::ClassifierKind parse_kind(const std::string& name, const json& params) {
  auto tag = classifiers::parse_tag(name);
  if (!tag) throw Error(ErrorCode::kConfig, "unknown classifier '" + name + "'");
  auto kind = classifiers::ClassifierKind::defaults(*tag);
  if (params.is_null()) return kind;
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, classifiers::LdaParams> || std::is_same_v<P, classifiers::QdaParams>) {
          read_if(params, "shrinkage", p.shrinkage);
        } else if constexpr (std::is_same_v<P, classifiers::NbParams>) {
          read_if(params, "var_floor", p.var_floor);
        } else if constexpr (std::is_same_v<P, classifiers::KnnParams>) {
          read_if(params, "k", p.k);
        } else if constexpr (std::is_same_v<P, classifiers::LinearSvmParams>) {
          read_if(params, "c", p.c);
          read_if(params, "tol", p.tol);
          read_if(params, "max_epochs", p.max_epochs);
        } else if constexpr (std::is_same_v<P, classifiers::RbfSvmParams>) {
          read_if(params, "c", p.c);
          read_if(params, "gamma", p.gamma);
          read_if(params, "tol", p.tol);
          read_if(params, "max_epochs", p.max_epochs);
        } else {
          read_if(params, "n_trees", p.n_trees);
          read_if(params, "min_leaf", p.min_leaf);
          read_if(params, "max_features", p.max_features);
        }
      },
      kind.params);
  return kind;
}

inline ordered_json kind_to_json(const classifiers::ClassifierKind& kind) {
  ordered_json j = ordered_json::object();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, classifiers::LdaParams> || std::is_same_v<P, classifiers::QdaParams>) {
          j["shrinkage"] = p.shrinkage;
        } else if constexpr (std::is_same_v<P, classifiers::NbParams>) {
          j["var_floor"] = p.var_floor;
        } else if constexpr (std::is_same_v<P, classifiers::KnnParams>) {
          j["k"] = p.k;
        } else if constexpr (std::is_same_v<P, classifiers::LinearSvmParams>) {
          j["c"] = p.c;
          j["tol"] = p.tol;
          j["max_epochs"] = p.max_epochs;
        } else if constexpr (std::is_same_v<P, classifiers::RbfSvmParams>) {
          j["c"] = p.c;
          j["gamma"] = p.gamma;
          j["tol"] = p.tol;
          j["max_epochs"] = p.max_epochs;
        } else {
          j["n_trees"] = p.n_trees;
          j["min_leaf"] = p.min_leaf;
          j["max_features"] = p.max_features;
        }
      },
      kind.params);
  return j;
}

}  // namespace detail

/// Reads a config tree. Relative paths are resolved against base_dir (the
/// directory of the config file). Unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j, const fs::path& base_dir = {}) {
  PipelineConfig cfg;
  auto check_keys = [](const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw Error(ErrorCode::kConfig, where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || key == a;
      if (!ok) throw Error(ErrorCode::kConfig, "unknown config key '" + where + "." + key + "'");
    }
  };
  auto resolve = [&](const std::string& p) { return p.empty() || base_dir.empty() ? fs::path(p) : base_dir / p; };
  try {
    check_keys(j, {"seed", "threads", "paths", "missing_policy", "standardize", "generator", "selection", "tsne",
                   "segmentation", "profile"},
               "config");
    detail::read_if(j, "seed", cfg.seed);
    detail::read_if(j, "threads", cfg.threads);
    detail::read_if(j, "standardize", cfg.standardize);
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"cohort", "schema", "output_dir"}, "paths");
      if (p.contains("cohort")) cfg.cohort_csv = resolve(p["cohort"].get<std::string>());
      if (p.contains("schema")) cfg.schema_path = resolve(p["schema"].get<std::string>());
      if (p.contains("output_dir")) cfg.output_dir = resolve(p["output_dir"].get<std::string>());
    }
    if (j.contains("missing_policy")) {
      const auto m = j["missing_policy"].get<std::string>();
      if (m == "drop-row") cfg.missing = MissingPolicy::kDropRow;
      else if (m == "impute-median") cfg.missing = MissingPolicy::kImputeMedian;
      else throw Error(ErrorCode::kConfig, "missing_policy must be drop-row or impute-median");
    }
    if (j.contains("generator")) {
      const auto& g = j["generator"];
      check_keys(g, {"n_samples", "schema", "impaired_domains", "shift", "noise_sd", "center_separation"}, "generator");
      auto& gen = cfg.generator;
      detail::read_if(g, "n_samples", gen.n_samples);
      detail::read_if(g, "shift", gen.shift);
      detail::read_if(g, "noise_sd", gen.noise_sd);
      detail::read_if(g, "center_separation", gen.center_separation);
      if (g.contains("schema")) {
        const auto s = g["schema"].get<std::string>();
        gen.descriptors = s == "desk" ? desk_schema() : load_schema(resolve(s));
      }
      if (g.contains("impaired_domains")) {
        gen.impaired_domains.clear();
        for (const auto& set : g["impaired_domains"]) gen.impaired_domains.push_back(detail::parse_domain_list(set));
        gen.n_clusters = gen.impaired_domains.size();
      }
    }
    if (j.contains("selection")) {
      const auto& s = j["selection"];
      check_keys(s, {"k_folds", "min_gain", "max_subset_size", "classifiers"}, "selection");
      detail::read_if(s, "k_folds", cfg.selection.wrapper.k_folds);
      if (s.contains("min_gain")) {
        // JSON has no infinity; accept the string "inf".
        const auto& mg = s["min_gain"];
        cfg.selection.wrapper.min_gain =
            mg.is_string() && mg.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity() : mg.get<double>();
      }
      detail::read_if(s, "max_subset_size", cfg.selection.wrapper.max_subset_size);
      if (s.contains("classifiers")) {
        const auto& c = s["classifiers"];
        if (c.is_array()) {
          for (const auto& name : c) cfg.selection.kinds.push_back(detail::parse_kind(name.get<std::string>(), json()));
        } else {
          for (const auto& [name, params] : c.items()) cfg.selection.kinds.push_back(detail::parse_kind(name, params));
        }
      }
    }
    if (j.contains("tsne")) {
      const auto& t = j["tsne"];
      check_keys(t, {"perplexity", "n_iter", "learning_rate", "early_exaggeration", "exaggeration_iters",
                     "momentum_early", "momentum_late", "kl_every"},
                 "tsne");
      detail::read_if(t, "perplexity", cfg.tsne.perplexity);
      detail::read_if(t, "n_iter", cfg.tsne.n_iter);
      detail::read_if(t, "learning_rate", cfg.tsne.learning_rate);
      detail::read_if(t, "early_exaggeration", cfg.tsne.early_exaggeration);
      detail::read_if(t, "exaggeration_iters", cfg.tsne.exaggeration_iters);
      detail::read_if(t, "momentum_early", cfg.tsne.momentum_early);
      detail::read_if(t, "momentum_late", cfg.tsne.momentum_late);
      detail::read_if(t, "kl_every", cfg.tsne.kl_every);
    }
    if (j.contains("segmentation")) {
      const auto& s = j["segmentation"];
      check_keys(s, {"resolution", "margin_frac", "closing_radius", "connectivity", "min_cluster_size", "markers"},
                 "segmentation");
      if (s.contains("resolution")) {
        const auto& r = s["resolution"];
        if (r.is_string() && r.get<std::string>() == "auto") cfg.segmentation.raster.resolution.reset();
        else cfg.segmentation.raster.resolution = r.get<int>();
      }
      detail::read_if(s, "margin_frac", cfg.segmentation.raster.margin_frac);
      detail::read_if(s, "closing_radius", cfg.segmentation.raster.closing_radius);
      detail::read_if(s, "connectivity", cfg.segmentation.connectivity);
      detail::read_if(s, "min_cluster_size", cfg.segmentation.min_cluster_size);
      if (s.contains("markers"))
        for (const auto& m : s["markers"]) cfg.segmentation.markers.emplace_back(m.at(0).get<double>(), m.at(1).get<double>());
    }
    if (j.contains("profile")) {
      check_keys(j["profile"], {"alpha"}, "profile");
      detail::read_if(j["profile"], "alpha", cfg.alpha);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  return cfg;
}

inline PipelineConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline ordered_json config_to_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["paths"] = {{"cohort", cfg.cohort_csv.string()},
                {"schema", cfg.schema_path.string()},
                {"output_dir", cfg.output_dir.string()}};
  j["missing_policy"] = cfg.missing == MissingPolicy::kDropRow ? "drop-row" : "impute-median";
  j["standardize"] = cfg.standardize;
  ordered_json gen;
  gen["n_samples"] = cfg.generator.n_samples;
  ordered_json doms = ordered_json::array();
  for (const auto& set : cfg.generator.impaired_domains) {
    std::vector<std::string> codes;
    for (Domain d : set) codes.emplace_back(1, to_char(d));
    doms.push_back(codes);
  }
  gen["impaired_domains"] = doms;
  gen["shift"] = cfg.generator.shift;
  gen["noise_sd"] = cfg.generator.noise_sd;
  gen["center_separation"] = cfg.generator.center_separation;
  j["generator"] = gen;
  ordered_json sel;
  sel["k_folds"] = cfg.selection.wrapper.k_folds;
  if (std::isinf(cfg.selection.wrapper.min_gain)) sel["min_gain"] = "inf";
  else sel["min_gain"] = cfg.selection.wrapper.min_gain;
  sel["max_subset_size"] = cfg.selection.wrapper.max_subset_size;
  ordered_json kinds = ordered_json::object();
  auto all = cfg.selection.kinds;
  if (all.empty())
    for (auto tag : classifiers::kAllTags) all.push_back(classifiers::ClassifierKind::defaults(tag));
  for (const auto& k : all) kinds[std::string(classifiers::to_string(k.tag()))] = detail::kind_to_json(k);
  sel["classifiers"] = kinds;
  j["selection"] = sel;
  j["tsne"] = {{"perplexity", cfg.tsne.perplexity},
               {"n_iter", cfg.tsne.n_iter},
               {"learning_rate", cfg.tsne.learning_rate},
               {"early_exaggeration", cfg.tsne.early_exaggeration},
               {"exaggeration_iters", cfg.tsne.exaggeration_iters},
               {"momentum_early", cfg.tsne.momentum_early},
               {"momentum_late", cfg.tsne.momentum_late},
               {"kl_every", cfg.tsne.kl_every}};
  ordered_json seg;
  if (cfg.segmentation.raster.resolution) seg["resolution"] = *cfg.segmentation.raster.resolution;
  else seg["resolution"] = "auto";
  seg["margin_frac"] = cfg.segmentation.raster.margin_frac;
  seg["closing_radius"] = cfg.segmentation.raster.closing_radius;
  seg["connectivity"] = cfg.segmentation.connectivity;
  seg["min_cluster_size"] = cfg.segmentation.min_cluster_size;
  ordered_json markers = ordered_json::array();
  for (auto [x, y] : cfg.segmentation.markers) markers.push_back({x, y});
  seg["markers"] = markers;
  j["segmentation"] = seg;
  j["profile"] = {{"alpha", cfg.alpha}};
  return j;
}

// ---------------------------------------------------------------------------
// File formats owned by the pipeline

inline std::string embedding_to_csv(const Matrix& coords, const std::vector<std::string>& ids) {
  std::string out = "sample_id,x,y\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    out += ids[static_cast<std::size_t>(i)] + "," + detail::format_double(coords(i, 0)) + "," +
           detail::format_double(coords(i, 1)) + "\n";
  return out;
}

/// Reads `sample_id,x,y` rows and orders them to match `ids`.
inline Matrix embedding_from_csv(std::string_view text, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i) row_of[ids[i]] = i;
  Matrix coords(static_cast<Eigen::Index>(ids.size()), 2);
  std::vector<bool> seen(ids.size(), false);
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 || line.empty()) continue;
    const auto f = detail::split_csv_line(line, line_no);
    if (f.size() != 3) throw Error(ErrorCode::kParse, "embedding row " + std::to_string(line_no) + ": expected 3 columns");
    auto it = row_of.find(f[0]);
    if (it == row_of.end()) throw Error(ErrorCode::kSchemaMismatch, "embedding names unknown sample " + f[0]);
    for (int c = 0; c < 2; ++c) {
      double v = 0;
      const auto& tok = f[static_cast<std::size_t>(c + 1)];
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error(ErrorCode::kParse, "embedding row " + std::to_string(line_no) + ", column " + std::to_string(c + 2) +
                                           ": cannot parse '" + tok + "'");
      coords(static_cast<Eigen::Index>(it->second), c) = v;
    }
    seen[it->second] = true;
  }
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!seen[i]) throw Error(ErrorCode::kSchemaMismatch, "embedding lacks sample " + ids[i]);
  return coords;
}

/// Scatter plot, one <circle> per sample, CN and MCI in two colours.
inline std::string scatter_svg(const Matrix& coords, std::span<const Label> labels, const std::string& title = "") {
  constexpr double size = 640, pad = 24;
  const double x0 = coords.col(0).minCoeff(), x1 = coords.col(0).maxCoeff();
  const double y0 = coords.col(1).minCoeff(), y1 = coords.col(1).maxCoeff();
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"660\" viewBox=\"0 0 640 660\">\n";
  out += "<rect width=\"640\" height=\"660\" fill=\"white\"/>\n";
  if (!title.empty()) out += "<text x=\"24\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" + title + "</text>\n";
  out += "<rect x=\"24\" y=\"644\" width=\"8\" height=\"8\" fill=\"#1f77b4\"/><text x=\"36\" y=\"652\" "
         "font-family=\"sans-serif\" font-size=\"10\">CN</text>\n";
  out += "<rect x=\"64\" y=\"644\" width=\"8\" height=\"8\" fill=\"#d62728\"/><text x=\"76\" y=\"652\" "
         "font-family=\"sans-serif\" font-size=\"10\">MCI</text>\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double px = pad + (coords(i, 0) - x0) / span * (size - 2 * pad);
    const double py = 20 + (size - 2 * pad) - (coords(i, 1) - y0) / span * (size - 2 * pad);
    const bool mci = labels[static_cast<std::size_t>(i)] == Label::MCI;
    out += "<circle cx=\"" + fmt(px) + "\" cy=\"" + fmt(py) + "\" r=\"2\" fill=\"" + (mci ? "#d62728" : "#1f77b4") +
           "\" fill-opacity=\"0.6\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

inline ordered_json clusters_to_json(const SegmentationResult& seg, const std::vector<std::string>& ids) {
  ordered_json j;
  const auto& a = seg.assignment;
  j["n_samples"] = a.cluster_of.size();
  j["n_clusters"] = a.n_clusters;
  j["noise"] = a.noise_count();
  j["grid"] = {{"width", seg.grid.width},
               {"height", seg.grid.height},
               {"bounds", {seg.grid.x_min, seg.grid.x_max, seg.grid.y_min, seg.grid.y_max}},
               {"mask_pixels", seg.grid.mask.count()}};
  ordered_json markers = ordered_json::array();
  for (const auto& m : seg.markers)
    markers.push_back({{"row", m.row}, {"col", m.col}, {"source", m.source == MarkerSource::kAuto ? "auto" : "manual"}});
  j["markers"] = markers;
  ordered_json census = ordered_json::array();
  for (std::size_t c = 0; c < a.census.size(); ++c)
    census.push_back({{"cluster", "C" + std::to_string(c + 1)},
                      {"cn", a.census[c].cn},
                      {"mci", a.census[c].mci},
                      {"total", a.census[c].total}});
  j["census"] = census;
  j["sample_ids"] = ids;
  j["cluster_of"] = a.cluster_of;
  return j;
}

inline ClusterAssignment clusters_from_json(const json& j, std::span<const Label> labels) {
  ClusterAssignment a;
  try {
    a.cluster_of = j.at("cluster_of").get<std::vector<int>>();
    a.n_clusters = j.at("n_clusters").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("clusters JSON: ") + e.what());
  }
  if (a.cluster_of.size() != labels.size())
    throw Error(ErrorCode::kShape, "clusters JSON covers " + std::to_string(a.cluster_of.size()) + " samples, cohort has " +
                                       std::to_string(labels.size()));
  a.census.resize(a.n_clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = a.cluster_of[i];
    if (c == kNoise) continue;
    if (c < 0 || static_cast<std::size_t>(c) >= a.n_clusters) throw Error(ErrorCode::kParse, "cluster index out of range");
    auto& cen = a.census[static_cast<std::size_t>(c)];
    (labels[i] == Label::MCI ? cen.mci : cen.cn) += 1;
    cen.total += 1;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Ground-truth comparison

struct DomainRecovery {
  int planted = 0;
  int matched_cluster = kNoise;  // found cluster overlapping the planted one most
  DomainSet planted_domains, found_domains;
  double precision = 0, recall = 0;
  std::string subtype;
};

struct TruthEvaluation {
  double ari = 0;
  std::vector<DomainRecovery> clusters;

  bool domains_recovered(double threshold) const {
    for (const auto& c : clusters)
      if (c.precision < threshold || c.recall < threshold) return false;
    return !clusters.empty();
  }
};

inline TruthEvaluation evaluate_against_truth(const SyntheticGroundTruth& truth, const ClusterAssignment& found,
                                              const std::vector<ClusterProfile>& profiles) {
  TruthEvaluation ev;
  ev.ari = adjusted_rand_index(truth.cluster_of, found.cluster_of);
  for (std::size_t k = 0; k < truth.impaired_domains.size(); ++k) {
    DomainRecovery r;
    r.planted = static_cast<int>(k);
    r.planted_domains = truth.impaired_domains[k];
    std::vector<std::size_t> overlap(found.n_clusters, 0);
    for (std::size_t i = 0; i < truth.cluster_of.size(); ++i)
      if (truth.cluster_of[i] == static_cast<int>(k) && found.cluster_of[i] != kNoise)
        ++overlap[static_cast<std::size_t>(found.cluster_of[i])];
    std::size_t best = 0;
    for (std::size_t c = 0; c < overlap.size(); ++c)
      if (overlap[c] > best) {
        best = overlap[c];
        r.matched_cluster = static_cast<int>(c);
      }
    for (const auto& p : profiles)
      if (p.cluster_id == r.matched_cluster) {
        r.found_domains = p.affected_domains;
        r.subtype = p.subtype;
      }
    std::size_t hit = 0;
    for (Domain d : r.found_domains) hit += r.planted_domains.count(d);
    r.precision = r.found_domains.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(r.found_domains.size());
    r.recall = r.planted_domains.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(r.planted_domains.size());
    if (r.matched_cluster == kNoise) r.subtype = "unmatched";
    ev.clusters.push_back(std::move(r));
  }
  return ev;
}

inline ordered_json evaluation_to_json(const TruthEvaluation& ev) {
  ordered_json j;
  j["adjusted_rand_index"] = ev.ari;
  ordered_json cl = ordered_json::array();
  for (const auto& c : ev.clusters) {
    auto codes = [](const DomainSet& s) {
      std::vector<std::string> v;
      for (Domain d : s) v.emplace_back(1, to_char(d));
      return v;
    };
    cl.push_back({{"planted", c.planted},
                  {"matched_cluster", c.matched_cluster == kNoise ? std::string("none") : "C" + std::to_string(c.matched_cluster + 1)},
                  {"planted_domains", codes(c.planted_domains)},
                  {"found_domains", codes(c.found_domains)},
                  {"precision", c.precision},
                  {"recall", c.recall},
                  {"subtype", c.subtype}});
  }
  j["clusters"] = cl;
  return j;
}

// ---------------------------------------------------------------------------
// Stages

using Logger = std::function<void(const std::string&)>;

/// Records the hash of every file a stage writes.
class OutputRecorder {
 public:
  explicit OutputRecorder(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, std::string_view content) {
    write_text_file(dir_ / name, content);
    hashes_[name] = sha256_hex(content);
  }
  const std::map<std::string, std::string>& hashes() const noexcept { return hashes_; }
  const fs::path& dir() const noexcept { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> hashes_;
};

struct CohortInput {
  CohortDataset data;
  std::optional<SyntheticGroundTruth> truth;
};

inline CohortInput stage_generate(const PipelineConfig& cfg, OutputRecorder& out) {
  auto [ds, truth] = generate_synthetic(cfg.generator, stage_seed(cfg, "generate"));
  out.write("cohort.csv", cohort_to_csv(ds));
  out.write("schema.json", schema_to_json(ds.descriptors()).dump(2) + "\n");
  out.write("ground_truth.json", ground_truth_to_json(truth).dump(2) + "\n");
  return {std::move(ds), std::move(truth)};
}

/// Loads the configured cohort, or the one a previous generate step left in
/// the output directory (with its ground truth, when present).
inline CohortInput load_input_cohort(const PipelineConfig& cfg) {
  const fs::path csv = cfg.cohort_csv.empty() ? cfg.output_dir / "cohort.csv" : cfg.cohort_csv;
  const fs::path schema = cfg.schema_path.empty() ? (cfg.cohort_csv.empty() ? cfg.output_dir / "schema.json" : fs::path())
                                                  : cfg.schema_path;
  if (schema.empty()) throw Error(ErrorCode::kConfig, "a cohort CSV needs a schema file (paths.schema or --schema)");
  CohortInput in{load_cohort(csv, schema, cfg.missing), std::nullopt};
  const fs::path truth = cfg.output_dir / "ground_truth.json";
  if (cfg.cohort_csv.empty() && fs::exists(truth)) in.truth = ground_truth_from_json(json::parse(read_text_file(truth)));
  return in;
}

inline CohortDataset prepared(const PipelineConfig& cfg, const CohortDataset& ds) {
  return cfg.standardize ? standardize(ds) : ds;
}

inline SelectionReport stage_select(const PipelineConfig& cfg, const CohortDataset& ds, OutputRecorder& out) {
  auto sel = cfg.selection;
  sel.wrapper.seed = stage_seed(cfg, "select");
  auto rep = run_ensemble_selection(prepared(cfg, ds), sel);
  out.write("selection_report.json", selection_report_to_json(rep).dump(2) + "\n");
  if (mask_size(rep.consensus) == 0)
    throw Error(ErrorCode::kEmptyFeatures, "empty consensus: no classifier selected any feature");
  return rep;
}

inline SelectionReport load_selection(const PipelineConfig& cfg, const CohortDataset& ds) {
  const fs::path path = cfg.output_dir / "selection_report.json";
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no selection report at " + path.string());
  std::vector<std::string> ids;
  for (const auto& d : ds.descriptors()) ids.push_back(d.id);
  return selection_report_from_json(json::parse(read_text_file(path)), ids);
}

inline Embedding2D stage_embed(const PipelineConfig& cfg, const CohortDataset& ds, const FeatureMask& mask,
                               OutputRecorder& out) {
  if (mask_size(mask) == 0) throw Error(ErrorCode::kConfig, "feature mask is empty; nothing to embed");
  const CohortDataset masked = standardize(ds.select_columns(selected_indices(mask)));
  auto params = cfg.tsne;
  params.seed = stage_seed(cfg, "embed");
  auto emb = tsne(masked.features(), params);
  out.write("embedding.csv", embedding_to_csv(emb.coords, ds.sample_ids()));
  out.write("scatter.svg", scatter_svg(emb.coords, ds.labels(), "t-SNE of " + std::to_string(mask_size(mask)) + " features"));
  return emb;
}

inline Matrix load_embedding(const PipelineConfig& cfg, const CohortDataset& ds) {
  const fs::path path = cfg.output_dir / "embedding.csv";
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no embedding at " + path.string());
  return embedding_from_csv(read_text_file(path), ds.sample_ids());
}

inline SegmentationResult stage_segment(const PipelineConfig& cfg, const CohortDataset& ds, const Matrix& coords,
                                        OutputRecorder& out) {
  auto seg = segment(coords, ds.labels(), cfg.segmentation);
  out.write("clusters.json", clusters_to_json(seg, ds.sample_ids()).dump(2) + "\n");
  out.write("mask.pgm", to_pgm(seg.grid.mask));
  out.write("regions.pgm", regions_to_pgm(seg.grid, seg.regions));
  return seg;
}

inline ClusterAssignment load_clusters(const PipelineConfig& cfg, const CohortDataset& ds) {
  const fs::path path = cfg.output_dir / "clusters.json";
  if (!fs::exists(path)) throw Error(ErrorCode::kIo, "no cluster assignment at " + path.string());
  return clusters_from_json(json::parse(read_text_file(path)), ds.labels());
}

/// Undersized clusters are reported as "indeterminate" with a warning.
inline std::vector<ClusterProfile> stage_profile(const PipelineConfig& cfg, const CohortDataset& ds,
                                                 const FeatureMask& mask, const ClusterAssignment& assignment,
                                                 const Matrix* coords, OutputRecorder& out, const Logger& warn = {}) {
  std::vector<ClusterProfile> profiles;
  ordered_json j;
  j["alpha"] = cfg.alpha;
  ordered_json arr = ordered_json::array();
  for (std::size_t c = 0; c < assignment.n_clusters; ++c) {
    ClusterProfile prof;
    ordered_json pj;
    try {
      prof = characterize_cluster(ds, assignment, static_cast<int>(c), mask, cfg.alpha);
      pj = profile_to_json(prof, &assignment.census[c]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientSamples) throw;
      if (warn) warn(e.what());
      prof.cluster_id = static_cast<int>(c);
      prof.n_cn = assignment.census[c].cn;
      prof.n_mci = assignment.census[c].mci;
      prof.subtype = "indeterminate";
      pj = profile_to_json(prof, &assignment.census[c]);
      pj["warning"] = e.what();
    }
    if (coords) {
      const auto g = gradation_summary(*coords, assignment, ds.labels(), static_cast<int>(c));
      pj["gradation"] = {{"rank_biserial", g.rank_biserial}, {"p_value", g.p_value}};
    }
    arr.push_back(pj);
    profiles.push_back(std::move(prof));
  }
  j["clusters"] = arr;
  out.write("profiles.json", j.dump(2) + "\n");
  out.write("large_effects.txt", large_effect_table(profiles, ds.descriptors()));
  return profiles;
}

struct RunResult {
  CohortInput cohort;
  SelectionReport selection;
  Embedding2D embedding;
  SegmentationResult segmentation;
  std::vector<ClusterProfile> profiles;
  std::optional<TruthEvaluation> evaluation;
  ordered_json manifest;
};

/// generate-or-load, select (or reuse), embed, segment, profile; then writes
/// manifest.json. All stage seeds derive from cfg.seed.
inline RunResult run_pipeline(const PipelineConfig& cfg, const Logger& log = {}) {
  set_max_threads(cfg.threads);
  OutputRecorder out(cfg.output_dir);
  ordered_json stages = ordered_json::array();
  auto timed = [&](const std::string& name, auto&& body) {
    if (log) log("stage " + name);
    const auto before = out.hashes();
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.code(), name + ": " + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ordered_json outputs = ordered_json::object();
    for (const auto& [file, hash] : out.hashes())
      if (!before.count(file) || before.at(file) != hash) outputs[file] = hash;
    stages.push_back({{"name", name}, {"seconds", secs}, {"outputs", outputs}});
  };

  std::optional<CohortInput> input;
  if (cfg.cohort_csv.empty()) {
    timed("generate", [&] { input = stage_generate(cfg, out); });
  } else {
    timed("load", [&] { input = load_input_cohort(cfg); });
  }
  RunResult res{std::move(*input), {}, {}, {}, {}, std::nullopt, {}};
  const CohortDataset& ds = res.cohort.data;
  if (cfg.skip_select) {
    timed("select", [&] { res.selection = load_selection(cfg, ds); });
  } else {
    timed("select", [&] { res.selection = stage_select(cfg, ds, out); });
  }
  timed("embed", [&] { res.embedding = stage_embed(cfg, ds, res.selection.consensus, out); });
  timed("segment", [&] { res.segmentation = stage_segment(cfg, ds, res.embedding.coords, out); });
  timed("profile", [&] {
    res.profiles = stage_profile(cfg, ds, res.selection.consensus, res.segmentation.assignment, &res.embedding.coords,
                                 out, log);
  });
  if (res.cohort.truth) {
    timed("evaluate", [&] {
      res.evaluation = evaluate_against_truth(*res.cohort.truth, res.segmentation.assignment, res.profiles);
      out.write("evaluation.json", evaluation_to_json(*res.evaluation).dump(2) + "\n");
    });
  }

  ordered_json m;
  m["tool"] = "cogsub";
  m["version"] = COGSUB_VERSION;
  m["compiler"] = __VERSION__;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["config"] = config_to_json(cfg);
  m["stages"] = stages;
  ordered_json hashes = ordered_json::object();
  for (const auto& [file, hash] : out.hashes()) hashes[file] = hash;
  m["output_hashes"] = hashes;
  write_text_file(cfg.output_dir / "manifest.json", m.dump(2) + "\n");
  res.manifest = std::move(m);
  return res;
}

}  // namespace cogsub
