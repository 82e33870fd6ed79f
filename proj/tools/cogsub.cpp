// cogsub: command-line front end for the subtype-discovery pipeline.
//
//   cogsub generate | select | embed | segment | profile | run  [options]
//
// Settings come from an optional JSON config (--config); flags override it.
// Failures print one JSON object on stderr and exit non-zero.

#include "cogsub/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace cogsub;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string output_dir, cohort, schema, missing;
  bool no_standardize = false;
  bool skip_select = false;
  std::optional<std::size_t> n_samples;
  std::optional<double> shift, min_gain, perplexity;
  std::optional<int> n_iter, closing_radius, connectivity;
  std::string resolution;
  std::optional<std::size_t> min_cluster_size;
  std::vector<std::string> markers;
};

std::pair<double, double> parse_marker(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used = 0;
    const double x = std::stod(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("x");
    const std::string ys = text.substr(comma + 1);
    const double y = std::stod(ys, &used);
    if (used != ys.size()) throw std::invalid_argument("y");
    return {x, y};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kArgument, "--marker expects x,y in embedding units, got '" + text + "'");
  }
}

PipelineConfig build_config(const Overrides& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.cohort.empty()) cfg.cohort_csv = o.cohort;
  if (!o.schema.empty()) cfg.schema_path = o.schema;
  if (o.missing == "drop-row") cfg.missing = MissingPolicy::kDropRow;
  else if (o.missing == "impute-median") cfg.missing = MissingPolicy::kImputeMedian;
  if (o.no_standardize) cfg.standardize = false;
  if (o.skip_select) cfg.skip_select = true;
  if (o.n_samples) cfg.generator.n_samples = *o.n_samples;
  if (o.shift) cfg.generator.shift = *o.shift;
  if (o.min_gain) cfg.selection.wrapper.min_gain = *o.min_gain;
  if (o.perplexity) cfg.tsne.perplexity = *o.perplexity;
  if (o.n_iter) cfg.tsne.n_iter = *o.n_iter;
  if (o.resolution == "auto") {
    cfg.segmentation.raster.resolution.reset();
  } else if (!o.resolution.empty()) {
    try {
      std::size_t used = 0;
      cfg.segmentation.raster.resolution = std::stoi(o.resolution, &used);
      if (used != o.resolution.size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kArgument, "--resolution expects a pixel count or 'auto', got '" + o.resolution + "'");
    }
  }
  if (o.closing_radius) cfg.segmentation.raster.closing_radius = *o.closing_radius;
  if (o.connectivity) cfg.segmentation.connectivity = *o.connectivity;
  if (o.min_cluster_size) cfg.segmentation.min_cluster_size = *o.min_cluster_size;
  if (!o.markers.empty()) {
    cfg.segmentation.markers.clear();
    for (const auto& m : o.markers) cfg.segmentation.markers.push_back(parse_marker(m));
  }
  set_max_threads(cfg.threads);
  return cfg;
}

void print_error(const std::string& code, const std::string& message, const std::string& command) {
  nlohmann::ordered_json j;
  j["error"] = code;
  j["message"] = message;
  if (!command.empty()) j["command"] = command;
  std::cerr << j.dump() << "\n";
}

void log_line(const std::string& s) { std::cerr << "[cogsub] " << s << "\n"; }

int cmd_generate(const PipelineConfig& cfg) {
  OutputRecorder out(cfg.output_dir);
  auto in = stage_generate(cfg, out);
  std::cout << "wrote " << in.data.n_samples() << " samples x " << in.data.n_features() << " features to "
            << cfg.output_dir.string() << "\n";
  return 0;
}

int cmd_select(const PipelineConfig& cfg) {
  OutputRecorder out(cfg.output_dir);
  const auto in = load_input_cohort(cfg);
  const auto rep = stage_select(cfg, in.data, out);
  std::cout << "consensus: " << mask_size(rep.consensus) << " of " << rep.consensus.size() << " features\n";
  return 0;
}

int cmd_embed(const PipelineConfig& cfg) {
  OutputRecorder out(cfg.output_dir);
  const auto in = load_input_cohort(cfg);
  const auto rep = load_selection(cfg, in.data);
  const auto emb = stage_embed(cfg, in.data, rep.consensus, out);
  std::cout << "embedded " << emb.coords.rows() << " samples, KL " << emb.final_kl << " (iteration "
            << emb.best_iteration << ")\n";
  return 0;
}

int cmd_segment(const PipelineConfig& cfg) {
  OutputRecorder out(cfg.output_dir);
  const auto in = load_input_cohort(cfg);
  const Matrix coords = load_embedding(cfg, in.data);
  const auto seg = stage_segment(cfg, in.data, coords, out);
  const auto& a = seg.assignment;
  std::cout << "Subset  #CN  #MCI  Total\n";
  for (std::size_t c = 0; c < a.n_clusters; ++c)
    std::cout << "C" << c + 1 << "  " << a.census[c].cn << "  " << a.census[c].mci << "  " << a.census[c].total << "\n";
  std::cout << "noise  " << a.noise_count() << "\n";
  return 0;
}

int cmd_profile(const PipelineConfig& cfg) {
  OutputRecorder out(cfg.output_dir);
  const auto in = load_input_cohort(cfg);
  const auto rep = load_selection(cfg, in.data);
  const auto clusters = load_clusters(cfg, in.data);
  std::optional<Matrix> coords;
  if (fs::exists(cfg.output_dir / "embedding.csv")) coords = load_embedding(cfg, in.data);
  const auto profiles = stage_profile(cfg, in.data, rep.consensus, clusters, coords ? &*coords : nullptr, out, log_line);
  std::cout << large_effect_table(profiles, in.data.descriptors());
  return 0;
}

int cmd_run(const PipelineConfig& cfg) {
  const auto res = run_pipeline(cfg, log_line);
  std::cout << large_effect_table(res.profiles, res.cohort.data.descriptors());
  if (res.evaluation) std::cout << "adjusted Rand index vs planted clusters: " << res.evaluation->ari << "\n";
  std::cout << "manifest: " << (cfg.output_dir / "manifest.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cognitive-impairment subtype discovery: wrapper selection, t-SNE, segmentation, profiling"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(COGSUB_VERSION));
  Overrides o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "root seed; every stage seed derives from it");
    sub->add_option("--threads", o.threads, "worker cap (0 = all cores)");
    sub->add_option("-o,--output-dir", o.output_dir, "directory for all outputs");
  };
  auto cohort_opts = [&](CLI::App* sub) {
    sub->add_option("--cohort", o.cohort, "cohort CSV (sample_id,label,F1,...)");
    sub->add_option("--schema", o.schema, "schema JSON mapping feature id to test and domain");
    sub->add_option("--missing", o.missing, "missing-value policy")->check(CLI::IsMember({"drop-row", "impute-median"}));
    sub->add_flag("--no-standardize", o.no_standardize, "use raw feature scales");
  };
  auto generator_opts = [&](CLI::App* sub) {
    sub->add_option("--n-samples", o.n_samples, "synthetic cohort size");
    sub->add_option("--shift", o.shift, "MCI mean shift on impaired domains, in noise sd");
  };
  auto select_opts = [&](CLI::App* sub) { sub->add_option("--min-gain", o.min_gain, "minimum accuracy gain per step"); };
  auto embed_opts = [&](CLI::App* sub) {
    sub->add_option("--perplexity", o.perplexity, "t-SNE perplexity");
    sub->add_option("--n-iter", o.n_iter, "t-SNE iterations");
  };
  auto segment_opts = [&](CLI::App* sub) {
    sub->add_option("--resolution", o.resolution, "raster side in pixels, or auto (scaled by sample count)");
    sub->add_option("--closing-radius", o.closing_radius, "disc radius of the binary closing");
    sub->add_option("--connectivity", o.connectivity, "pixel connectivity (4 or 8)");
    sub->add_option("--marker", o.markers, "marker x,y in embedding units (repeatable; disables auto markers)");
    sub->add_option("--min-cluster-size", o.min_cluster_size, "regions with fewer samples become noise");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic cohort with planted clusters");
  common(gen);
  generator_opts(gen);
  auto* sel = app.add_subcommand("select", "ensemble wrapper feature selection");
  common(sel);
  cohort_opts(sel);
  select_opts(sel);
  auto* emb = app.add_subcommand("embed", "t-SNE of the consensus features");
  common(emb);
  cohort_opts(emb);
  embed_opts(emb);
  auto* seg = app.add_subcommand("segment", "raster segmentation of the embedding");
  common(seg);
  cohort_opts(seg);
  segment_opts(seg);
  auto* prof = app.add_subcommand("profile", "per-cluster statistics and subtype labels");
  common(prof);
  cohort_opts(prof);
  auto* run = app.add_subcommand("run", "all stages plus a run manifest");
  common(run);
  cohort_opts(run);
  generator_opts(run);
  select_opts(run);
  embed_opts(run);
  segment_opts(run);
  run->add_flag("--skip-select", o.skip_select, "reuse selection_report.json from the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(std::string(to_string(ErrorCode::kArgument)), e.what(), "");
    return 2;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    const PipelineConfig cfg = build_config(o);
    if (name == "generate") return cmd_generate(cfg);
    if (name == "select") return cmd_select(cfg);
    if (name == "embed") return cmd_embed(cfg);
    if (name == "segment") return cmd_segment(cfg);
    if (name == "profile") return cmd_profile(cfg);
    return cmd_run(cfg);
  } catch (const Error& e) {
    print_error(std::string(to_string(e.code())), e.what(), name);
    return 1;
  } catch (const nlohmann::json::exception& e) {
    print_error(std::string(to_string(ErrorCode::kParse)), e.what(), name);
    return 1;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what(), name);
    return 1;
  }
}
