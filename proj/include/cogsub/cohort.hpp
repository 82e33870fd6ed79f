#pragma once

// Cohort data model: feature descriptors, the CN/MCI dataset, CSV/JSON
// ingestion and export, z-scoring and the synthetic cohort generator.

#include "cogsub/common.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace cogsub {

enum class Domain : std::uint8_t { A, E, L, M, O, V };

inline constexpr std::array<Domain, 6> kAllDomains = {Domain::A, Domain::E, Domain::L,
                                                      Domain::M, Domain::O, Domain::V};

inline constexpr char to_char(Domain d) noexcept { return "AELMOV"[static_cast<int>(d)]; }

inline std::optional<Domain> parse_domain(std::string_view s) noexcept {
  if (s.size() != 1) return std::nullopt;
  for (Domain d : kAllDomains)
    if (to_char(d) == s[0]) return d;
  return std::nullopt;
}

using DomainSet = std::set<Domain>;

inline std::string to_string(const DomainSet& ds) {
  std::string out;
  for (Domain d : ds) out.push_back(to_char(d));
  return out;
}

inline std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "CN") return Label::CN;
  if (s == "MCI") return Label::MCI;
  return std::nullopt;
}

struct FeatureDescriptor {
  std::string id;
  std::string test;
  Domain domain = Domain::A;

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

using Schema = std::vector<FeatureDescriptor>;

inline void validate_schema(const Schema& schema) {
  std::unordered_set<std::string> seen;
  for (const auto& d : schema) {
    if (d.id.empty()) throw Error(ErrorCode::kSchemaMismatch, "feature id must be non-empty");
    if (!seen.insert(d.id).second)
      throw Error(ErrorCode::kSchemaMismatch, "duplicate feature id '" + d.id + "' in schema");
  }
}

/// Immutable CN/MCI cohort. Construction validates every invariant, so a
/// CohortDataset in hand is always well-formed.
class CohortDataset {
 public:
  CohortDataset(Matrix features, std::vector<Label> labels, Schema descriptors,
                std::vector<std::string> sample_ids = {})
      : features_(std::move(features)),
        labels_(std::move(labels)),
        descriptors_(std::move(descriptors)),
        sample_ids_(std::move(sample_ids)) {
    const auto n = static_cast<std::size_t>(features_.rows());
    if (labels_.size() != n)
      throw Error(ErrorCode::kShape, "labels length " + std::to_string(labels_.size()) +
                                         " != n_samples " + std::to_string(n));
    if (descriptors_.size() != static_cast<std::size_t>(features_.cols()))
      throw Error(ErrorCode::kShape, "descriptor count does not match feature columns");
    validate_schema(descriptors_);
    if (!features_.allFinite())
      throw Error(ErrorCode::kParse, "feature matrix contains NaN or infinite values");
    if (count(Label::CN) < 2 || count(Label::MCI) < 2)
      throw Error(ErrorCode::kDegenerateLabels, "cohort needs at least 2 samples of each class");
    if (sample_ids_.empty()) {
      sample_ids_.reserve(n);
      for (std::size_t i = 0; i < n; ++i) sample_ids_.push_back("S" + std::to_string(i + 1));
    } else if (sample_ids_.size() != n) {
      throw Error(ErrorCode::kShape, "sample id count does not match n_samples");
    }
  }

  const Matrix& features() const noexcept { return features_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const Schema& descriptors() const noexcept { return descriptors_; }
  const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
  std::size_t n_samples() const noexcept { return labels_.size(); }
  std::size_t n_features() const noexcept { return descriptors_.size(); }

  std::size_t count(Label l) const noexcept {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), l));
  }

  /// Keeps the listed columns, in the given order.
  CohortDataset select_columns(const std::vector<std::size_t>& cols) const {
    if (cols.empty()) throw Error(ErrorCode::kEmptyFeatures, "column selection is empty");
    Matrix x(features_.rows(), static_cast<Eigen::Index>(cols.size()));
    Schema d;
    d.reserve(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] >= n_features()) throw Error(ErrorCode::kShape, "column index out of range");
      x.col(static_cast<Eigen::Index>(j)) = features_.col(static_cast<Eigen::Index>(cols[j]));
      d.push_back(descriptors_[cols[j]]);
    }
    return {std::move(x), labels_, std::move(d), sample_ids_};
  }

  friend bool operator==(const CohortDataset& a, const CohortDataset& b) {
    return a.features_.rows() == b.features_.rows() && a.features_.cols() == b.features_.cols() &&
           a.features_ == b.features_ && a.labels_ == b.labels_ &&
           a.descriptors_ == b.descriptors_ && a.sample_ids_ == b.sample_ids_;
  }

 private:
  Matrix features_;
  std::vector<Label> labels_;
  Schema descriptors_;
  std::vector<std::string> sample_ids_;
};

// ---------------------------------------------------------------------------
// Schema file: JSON object, feature id -> {"test": ..., "domain": ...}.
// Key order in the file defines column order.

inline Schema schema_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParse, "schema must be a JSON object");
  Schema schema;
  for (const auto& [id, entry] : j.items()) {
    if (!entry.is_object() || !entry.contains("domain"))
      throw Error(ErrorCode::kParse, "schema entry '" + id + "' needs a domain");
    auto dom = parse_domain(entry.at("domain").get<std::string>());
    if (!dom)
      throw Error(ErrorCode::kSchemaMismatch, "schema entry '" + id + "' has unknown domain '" +
                                                  entry.at("domain").get<std::string>() + "'");
    schema.push_back({id, entry.value("test", std::string{}), *dom});
  }
  validate_schema(schema);
  return schema;
}

inline nlohmann::ordered_json schema_to_json(const Schema& schema) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& d : schema) j[d.id] = {{"test", d.test}, {"domain", std::string(1, to_char(d.domain))}};
  return j;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

inline Schema load_schema(const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, "schema '" + path.string() + "': " + e.what());
  }
  return schema_from_json(j);
}

inline void save_schema(const std::filesystem::path& path, const Schema& schema) {
  write_text_file(path, schema_to_json(schema).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Cohort CSV: header `sample_id,label,F1,...,Fk`.

enum class MissingPolicy { kDropRow, kImputeMedian };

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_missing_label = 0;
  std::size_t rows_dropped_missing_values = 0;
  std::size_t values_imputed = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t row) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty())
        throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ", column " +
                                           std::to_string(out.size() + 1) + ": stray quote");
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted)
    throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ": unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace detail

inline CohortDataset parse_cohort_csv(std::string_view text, const Schema& schema,
                                      MissingPolicy policy = MissingPolicy::kDropRow,
                                      LoadReport* report = nullptr) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::kParse, "row 1: empty CSV, header expected");

  const auto header = detail::split_csv_line(lines[0], 1);
  if (header.size() < 2 || detail::trim(header[0]) != "sample_id" || detail::trim(header[1]) != "label")
    throw Error(ErrorCode::kParse, "row 1: header must start with 'sample_id,label'");

  std::unordered_map<std::string, std::size_t> schema_index;
  for (std::size_t j = 0; j < schema.size(); ++j) schema_index.emplace(schema[j].id, j);

  // csv column -> schema column
  std::vector<std::size_t> col_to_feature(header.size(), 0);
  std::vector<bool> present(schema.size(), false);
  for (std::size_t c = 2; c < header.size(); ++c) {
    std::string id(detail::trim(header[c]));
    auto it = schema_index.find(id);
    if (it == schema_index.end())
      throw Error(ErrorCode::kSchemaMismatch, "CSV column '" + id + "' is not in the schema");
    if (present[it->second])
      throw Error(ErrorCode::kParse, "row 1, column " + std::to_string(c + 1) + ": duplicate feature '" + id + "'");
    present[it->second] = true;
    col_to_feature[c] = it->second;
  }
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (!present[j])
      throw Error(ErrorCode::kSchemaMismatch, "schema feature '" + schema[j].id + "' missing from CSV");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rows;
  std::vector<Label> labels;
  std::vector<std::string> ids;
  LoadReport rep;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::size_t rowno = r + 1;
    if (detail::trim(lines[r]).empty()) continue;
    auto fields = detail::split_csv_line(lines[r], rowno);
    if (fields.size() != header.size())
      throw Error(ErrorCode::kParse, "row " + std::to_string(rowno) + ": expected " +
                                         std::to_string(header.size()) + " columns, found " +
                                         std::to_string(fields.size()));
    ++rep.rows_read;
    auto label_text = detail::trim(fields[1]);
    if (detail::is_missing_token(label_text)) {
      ++rep.rows_dropped_missing_label;
      continue;
    }
    auto label = parse_label(label_text);
    if (!label)
      throw Error(ErrorCode::kLabel, "row " + std::to_string(rowno) + ", column 2: label '" +
                                         std::string(label_text) + "' is not CN or MCI");
    std::vector<double> values(schema.size(), nan);
    bool has_missing = false;
    for (std::size_t c = 2; c < fields.size(); ++c) {
      auto tok = detail::trim(fields[c]);
      if (detail::is_missing_token(tok)) {
        has_missing = true;
        continue;
      }
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw Error(ErrorCode::kParse, "row " + std::to_string(rowno) + ", column " +
                                           std::to_string(c + 1) + ": cannot parse '" +
                                           std::string(tok) + "' as a number");
      values[col_to_feature[c]] = v;
    }
    if (has_missing && policy == MissingPolicy::kDropRow) {
      ++rep.rows_dropped_missing_values;
      continue;
    }
    rows.push_back(std::move(values));
    labels.push_back(*label);
    ids.emplace_back(detail::trim(fields[0]));
  }

  if (policy == MissingPolicy::kImputeMedian) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      for (Label l : {Label::CN, Label::MCI}) {
        std::vector<double> observed;
        for (std::size_t i = 0; i < rows.size(); ++i)
          if (labels[i] == l && !std::isnan(rows[i][j])) observed.push_back(rows[i][j]);
        bool needs = false;
        for (std::size_t i = 0; i < rows.size(); ++i) needs |= labels[i] == l && std::isnan(rows[i][j]);
        if (!needs) continue;
        if (observed.empty())
          throw Error(ErrorCode::kParse, "feature '" + schema[j].id + "' has no observed " +
                                             std::string(to_string(l)) + " values to impute from");
        const double med = detail::median_of(std::move(observed));
        for (std::size_t i = 0; i < rows.size(); ++i)
          if (labels[i] == l && std::isnan(rows[i][j])) {
            rows[i][j] = med;
            ++rep.values_imputed;
          }
      }
    }
  }

  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < schema.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  if (report) *report = rep;
  return {std::move(x), std::move(labels), schema, std::move(ids)};
}

inline CohortDataset load_cohort(const std::filesystem::path& csv_path,
                                 const std::filesystem::path& schema_path,
                                 MissingPolicy policy = MissingPolicy::kDropRow,
                                 LoadReport* report = nullptr) {
  return parse_cohort_csv(read_text_file(csv_path), load_schema(schema_path), policy, report);
}

inline std::string cohort_to_csv(const CohortDataset& ds) {
  std::string out = "sample_id,label";
  for (const auto& d : ds.descriptors()) out += "," + d.id;
  out += "\n";
  const Matrix& x = ds.features();
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    out += ds.sample_ids()[i];
    out += ",";
    out += to_string(ds.labels()[i]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out += ",";
      out += detail::format_double(x(static_cast<Eigen::Index>(i), j));
    }
    out += "\n";
  }
  return out;
}

inline void save_cohort(const std::filesystem::path& csv_path, const CohortDataset& ds) {
  write_text_file(csv_path, cohort_to_csv(ds));
}

// ---------------------------------------------------------------------------

/// Column-wise z-score with the n-1 denominator. Zero-variance columns map to 0.
inline CohortDataset standardize(const CohortDataset& ds) {
  Matrix x = ds.features();
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto col = x.col(j);
    const double mean = col.sum() / n;
    const double ss = (col.array() - mean).square().sum();
    const double sd = x.rows() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      col.setZero();
      continue;
    }
    col = (col.array() - mean) / sd;
  }
  return {std::move(x), ds.labels(), ds.descriptors(), ds.sample_ids()};
}

// ---------------------------------------------------------------------------
// Synthetic cohorts with planted structure.

struct SyntheticGroundTruth {
  std::vector<int> cluster_of;
  std::vector<DomainSet> impaired_domains;
  std::vector<double> shift_magnitude;
};

struct GeneratorConfig {
  std::size_t n_samples = 2000;
  std::size_t n_clusters = 3;
  Schema descriptors;
  std::vector<DomainSet> impaired_domains;  // one set per cluster
  double shift = 1.0;                       // in units of noise_sd, applied to MCI members
  double noise_sd = 1.0;
  double center_separation = 6.0;           // minimum pairwise center distance, in noise_sd
};

/// Twelve-feature desk-scale schema: two features from each of the six
/// domains, ids and tests taken from the full 68-feature battery.
inline Schema desk_schema() {
  return {
      {"F1", "MMSE", Domain::O},  {"F2", "MMSE", Domain::O},  {"F3", "MMSE", Domain::V},
      {"F4", "LM", Domain::M},    {"F8", "LM", Domain::M},    {"F12", "BF", Domain::V},
      {"F19", "DS", Domain::A},   {"F22", "DS", Domain::E},   {"F23", "CF", Domain::L},
      {"F24", "CF", Domain::L},   {"F25", "TMT", Domain::A},  {"F28", "TMT", Domain::E},
  };
}

/// Three clusters impairing all domains, {A,E} and {V,A,E} respectively.
inline GeneratorConfig three_subtype_config() {
  GeneratorConfig cfg;
  cfg.descriptors = desk_schema();
  cfg.impaired_domains = {
      DomainSet(kAllDomains.begin(), kAllDomains.end()),
      {Domain::A, Domain::E},
      {Domain::V, Domain::A, Domain::E},
  };
  return cfg;
}

inline void validate(const GeneratorConfig& cfg) {
  if (cfg.descriptors.empty()) throw Error(ErrorCode::kConfig, "generator needs at least one feature descriptor");
  validate_schema(cfg.descriptors);
  if (cfg.n_clusters < 1) throw Error(ErrorCode::kConfig, "n_clusters must be >= 1");
  if (cfg.impaired_domains.size() != cfg.n_clusters)
    throw Error(ErrorCode::kConfig, "need one impaired-domain set per cluster");
  if (cfg.n_samples < 4 * cfg.n_clusters)
    throw Error(ErrorCode::kConfig, "n_samples must allow 2 CN and 2 MCI per cluster");
  if (!(cfg.noise_sd > 0) || !std::isfinite(cfg.shift) || !(cfg.center_separation >= 0))
    throw Error(ErrorCode::kConfig, "noise_sd must be positive, shift and separation finite");
  DomainSet available;
  for (const auto& d : cfg.descriptors) available.insert(d.domain);
  for (std::size_t k = 0; k < cfg.n_clusters; ++k) {
    if (cfg.impaired_domains[k].empty())
      throw Error(ErrorCode::kConfig, "cluster " + std::to_string(k) + " has no impaired domains");
    for (Domain d : cfg.impaired_domains[k])
      if (!available.count(d))
        throw Error(ErrorCode::kConfig, std::string("domain ") + to_char(d) + " of cluster " +
                                            std::to_string(k) + " has no features in the schema");
  }
}

/// Draws per-cluster isotropic Gaussian blobs. Within cluster k, MCI members
/// have the features of impaired_domains[k] lowered by shift * noise_sd.
/// Output is a pure function of (cfg, seed).
inline std::pair<CohortDataset, SyntheticGroundTruth> generate_synthetic(const GeneratorConfig& cfg,
                                                                         std::uint64_t seed) {
  validate(cfg);
  const std::size_t n = cfg.n_samples, p = cfg.descriptors.size(), kc = cfg.n_clusters;
  std::mt19937_64 rng(derive_seed(seed, stream_id("generate")));
  std::normal_distribution<double> normal(0.0, 1.0);

  // Random directions rescaled so the closest pair sits at center_separation.
  Matrix centers = Matrix::Zero(static_cast<Eigen::Index>(kc), static_cast<Eigen::Index>(p));
  if (kc > 1) {
    for (Eigen::Index k = 0; k < centers.rows(); ++k)
      for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(k, j) = normal(rng);
    double min_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < centers.rows(); ++a)
      for (Eigen::Index b = a + 1; b < centers.rows(); ++b)
        min_dist = std::min(min_dist, (centers.row(a) - centers.row(b)).norm());
    if (min_dist > 0) centers *= cfg.center_separation * cfg.noise_sd / min_dist;
  }

  // Cluster sizes differ by at most one; labels alternate CN/MCI inside a cluster.
  std::vector<int> cluster_of(n);
  std::vector<Label> labels(n);
  {
    std::size_t i = 0;
    for (std::size_t k = 0; k < kc; ++k) {
      const std::size_t size = n / kc + (k < n % kc ? 1 : 0);
      for (std::size_t m = 0; m < size; ++m, ++i) {
        cluster_of[i] = static_cast<int>(k);
        labels[i] = m % 2 == 0 ? Label::CN : Label::MCI;
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<int> out_cluster(n);
  std::vector<Label> out_labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = order[r];
    const int k = cluster_of[src];
    const bool impaired = labels[src] == Label::MCI;
    const auto& doms = cfg.impaired_domains[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < p; ++j) {
      double v = centers(k, static_cast<Eigen::Index>(j)) + cfg.noise_sd * normal(rng);
      if (impaired && doms.count(cfg.descriptors[j].domain)) v -= cfg.shift * cfg.noise_sd;
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
    out_cluster[r] = k;
    out_labels[r] = labels[src];
  }

  SyntheticGroundTruth truth{std::move(out_cluster), cfg.impaired_domains,
                             std::vector<double>(kc, cfg.shift)};
  return {CohortDataset(std::move(x), std::move(out_labels), cfg.descriptors), std::move(truth)};
}

inline nlohmann::ordered_json ground_truth_to_json(const SyntheticGroundTruth& gt) {
  nlohmann::ordered_json j;
  j["cluster_of"] = gt.cluster_of;
  nlohmann::ordered_json doms = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < gt.impaired_domains.size(); ++k) {
    std::vector<std::string> codes;
    for (Domain d : gt.impaired_domains[k]) codes.emplace_back(1, to_char(d));
    doms[std::to_string(k)] = codes;
  }
  j["impaired_domains"] = doms;
  j["shift_magnitude"] = gt.shift_magnitude;
  return j;
}

inline SyntheticGroundTruth ground_truth_from_json(const nlohmann::json& j) {
  SyntheticGroundTruth gt;
  try {
    gt.cluster_of = j.at("cluster_of").get<std::vector<int>>();
    const auto& doms = j.at("impaired_domains");
    std::map<int, DomainSet> by_index;
    for (const auto& [key, codes] : doms.items()) {
      DomainSet set;
      for (const auto& c : codes) {
        auto d = parse_domain(c.get<std::string>());
        if (!d) throw Error(ErrorCode::kParse, "ground truth: unknown domain code");
        set.insert(*d);
      }
      by_index[std::stoi(key)] = std::move(set);
    }
    for (auto& [k, s] : by_index) gt.impaired_domains.push_back(std::move(s));
    if (j.contains("shift_magnitude")) gt.shift_magnitude = j.at("shift_magnitude").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("ground truth JSON: ") + e.what());
  }
  return gt;
}

}  // namespace cogsub
