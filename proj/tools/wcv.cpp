// wcv: build GMM sets from data clouds, evaluate OTAF + pseudo-mixture
// classification by leave-one-out, and export convergence traces.
//
// Exit codes: 0 success, 1 configuration or parse error, 2 finished with
// skipped folds.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wcv/error.hpp"
#include "wcv/evaluation.hpp"
#include "wcv/gmm_build.hpp"
#include "wcv/io.hpp"
#include "wcv/otaf.hpp"
#include "wcv/parallel.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct InputOptions {
  std::string manifest;
  std::string long_csv;
  std::vector<std::string> gmm_sets;
  int top_features = 0;
};

struct GmmOptions {
  std::string scheme = "separate";
  int components = 3;
  int threshold = 10;
  double perturbation_sd = 0.1;
  std::vector<std::string> reps;  // scheme:components, one per representation
};

struct Options {
  InputOptions input;
  GmmOptions gmm;
  wcv::EvaluationConfig eval;
  std::optional<double> shape;
  std::optional<double> scale;
  bool no_reduce = false;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 0;
};

void add_input_options(CLI::App& cmd, Options& o, bool allow_gmms) {
  auto* group = cmd.add_option_group("input");
  group->add_option("--manifest", o.input.manifest, "Manifest CSV (id,path,label)")->check(CLI::ExistingFile);
  group->add_option("--long", o.input.long_csv, "Long-format CSV (id,label,features...)")->check(CLI::ExistingFile);
  if (allow_gmms) {
    group->add_option("--gmms", o.input.gmm_sets, "GMM set directory written by 'build'; repeatable")
        ->check(CLI::ExistingPath);
  }
  group->require_option(1);
  cmd.add_option("--top-features", o.input.top_features, "Keep the k most variable coordinates (clouds only)")
      ->check(CLI::NonNegativeNumber);
}

void add_gmm_options(CLI::App& cmd, Options& o, bool allow_reps) {
  cmd.add_option("--scheme", o.gmm.scheme, "Clustering scheme")->check(CLI::IsMember({"combined", "separate"}));
  cmd.add_option("--components", o.gmm.components, "Gaussian components per instance");
  cmd.add_option("--small-threshold", o.gmm.threshold, "Clouds below this size get a single Gaussian");
  cmd.add_option("--perturbation-sd", o.gmm.perturbation_sd, "Noise sd for single-point covariances");
  if (allow_reps) {
    cmd.add_option("--rep", o.gmm.reps, "Extra representation scheme:components (clouds only); repeatable");
  }
}

void add_otaf_options(CLI::App& cmd, Options& o) {
  auto& c = o.eval.otaf;
  cmd.add_option("--dims", c.reduced_dim, "Reduced dimension d'");
  cmd.add_option("--alpha", c.alpha, "Fraction of instances used as anchors");
  cmd.add_option("--epsilon", c.epsilon, "Relative-increase convergence threshold");
  cmd.add_option("--min-iters", c.min_iters, "Minimum number of iterations");
  cmd.add_option("--max-iters", c.max_iters, "Maximum number of iterations");
  cmd.add_option("--orthonormal", c.orthonormal, "Orthonormalize the projection (true|false)");
}

void add_common_options(CLI::App& cmd, Options& o) {
  cmd.add_option("--seed", o.seed, "Random seed for GMM construction");
  cmd.add_option("--out", o.out, "Output directory")->required();
  cmd.add_option("--threads", o.threads, "Worker threads (WCV_THREADS overrides)");
}

wcv::GmmBuildConfig gmm_config(const Options& o, const std::string& scheme, int components) {
  wcv::GmmBuildConfig cfg;
  cfg.scheme = wcv::parse_scheme(scheme);
  cfg.components = components;
  cfg.small_sample_threshold = o.gmm.threshold;
  cfg.perturbation_sd = o.gmm.perturbation_sd;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

std::pair<std::string, int> parse_rep(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw wcv::Error(wcv::ErrorCode::InvalidInput, "--rep expects scheme:components");
  const std::string count = text.substr(colon + 1);
  char* end = nullptr;
  const long k = std::strtol(count.c_str(), &end, 10);
  if (count.empty() || *end != '\0' || k < 1 || k > 1000) {
    throw wcv::Error(wcv::ErrorCode::InvalidInput, "invalid component count in --rep '" + text + "'");
  }
  return {text.substr(0, colon), static_cast<int>(k)};
}

std::vector<wcv::DataCloud> load_clouds(const Options& o) {
  auto clouds = o.input.manifest.empty() ? wcv::io::read_long_csv(o.input.long_csv) : wcv::io::read_manifest(o.input.manifest);
  wcv::validate_clouds(clouds);
  if (o.input.top_features > 0) clouds = wcv::select_top_variable_features(clouds, o.input.top_features);
  return clouds;
}

json input_json(const Options& o) {
  json j = json::object();
  if (!o.input.manifest.empty()) j["manifest"] = o.input.manifest;
  if (!o.input.long_csv.empty()) j["long"] = o.input.long_csv;
  if (!o.input.gmm_sets.empty()) j["gmms"] = o.input.gmm_sets;
  if (o.input.top_features > 0) j["top_features"] = o.input.top_features;
  return j;
}

wcv::EvaluationConfig evaluation_config(const Options& o) {
  wcv::EvaluationConfig cfg = o.eval;
  cfg.reduce = !o.no_reduce;
  cfg.classifier.shape = o.shape;
  cfg.classifier.scale = o.scale;
  return cfg;
}

std::vector<std::unique_ptr<wcv::Representation>> load_representations(const Options& o) {
  std::vector<std::unique_ptr<wcv::Representation>> reps;
  if (!o.input.gmm_sets.empty()) {
    if (!o.gmm.reps.empty()) throw wcv::Error(wcv::ErrorCode::InvalidInput, "--rep applies to cloud inputs only");
    for (const auto& dir : o.input.gmm_sets) {
      reps.push_back(std::make_unique<wcv::SampleRepresentation>(wcv::io::read_gmm_set(dir), dir));
    }
    return reps;
  }
  const auto clouds = load_clouds(o);
  std::vector<std::pair<std::string, int>> specs;
  if (o.gmm.reps.empty()) specs.emplace_back(o.gmm.scheme, o.gmm.components);
  for (const auto& r : o.gmm.reps) specs.push_back(parse_rep(r));
  for (const auto& [scheme, k] : specs) {
    reps.push_back(std::make_unique<wcv::CloudRepresentation>(clouds, gmm_config(o, scheme, k),
                                                              scheme + ":" + std::to_string(k)));
  }
  return reps;
}

std::string trace_name(const std::string& stem, bool orthonormal) {
  return stem + (orthonormal ? "_orthonormal.csv" : "_nonorthonormal.csv");
}

void validate_otaf(const Options& o, const std::vector<std::unique_ptr<wcv::Representation>>& reps) {
  if (o.no_reduce) return;
  const auto dim = reps.front()->held_out(0).distribution.dim();
  o.eval.otaf.validate(dim);
}

int cmd_build(const Options& o) {
  const auto clouds = load_clouds(o);
  const auto cfg = gmm_config(o, o.gmm.scheme, o.gmm.components);
  std::vector<std::string> warnings;
  const auto samples = wcv::build_gmms(clouds, cfg, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const json config = {{"command", "build"}, {"input", input_json(o)}, {"gmm", cfg.to_json()}, {"seed", o.seed}};
  wcv::io::write_files(wcv::io::gmm_set_files(o.out, samples, config));
  std::cout << "wrote " << samples.size() << " mixtures to " << o.out << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const auto reps = load_representations(o);
  validate_otaf(o, reps);
  const auto cfg = evaluation_config(o);
  json config = {{"command", "evaluate"}, {"input", input_json(o)}, {"evaluation", cfg.to_json()}, {"seed", o.seed}};
  json described = json::array();
  for (const auto& r : reps) described.push_back(r->describe());
  config["representations"] = described;

  wcv::io::FileSet files;
  const fs::path out(o.out);
  std::size_t skipped = 0;
  json report = {{"format", "wcv.report.v1"}, {"config", config}};
  if (reps.size() == 1) {
    const auto r = wcv::leave_one_out(*reps.front(), cfg);
    skipped = r.skipped;
    report["result"] = wcv::io::report_to_json(r);
    if (cfg.reduce) files[out / trace_name("traces", cfg.otaf.orthonormal)] = wcv::io::traces_csv(r.folds, cfg.otaf.orthonormal, config);
    std::cout << "accuracy " << wcv::io::format_double(r.accuracy) << "  auc " << wcv::io::format_double(r.auc)
              << "  skipped folds " << r.skipped << '\n';
  } else {
    std::vector<const wcv::Representation*> ptrs;
    for (const auto& r : reps) ptrs.push_back(r.get());
    const auto grid = wcv::cross_representation_eval(ptrs, cfg);
    json rows = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < grid[i].size(); ++j) {
        skipped += grid[i][j].skipped;
        json cell = wcv::io::report_to_json(grid[i][j]);
        cell["train"] = i;
        cell["test"] = j;
        row.push_back(std::move(cell));
        std::cout << "train " << i << " test " << j << "  accuracy " << wcv::io::format_double(grid[i][j].accuracy)
                  << "  auc " << wcv::io::format_double(grid[i][j].auc) << '\n';
      }
      rows.push_back(std::move(row));
      if (cfg.reduce) {
        files[out / trace_name("traces_train" + std::to_string(i), cfg.otaf.orthonormal)] =
            wcv::io::traces_csv(grid[i][i].folds, cfg.otaf.orthonormal, config);
      }
    }
    report["grid"] = rows;
  }
  files[out / "report.json"] = wcv::io::dump(report);
  wcv::io::write_files(files);
  if (skipped > 0) {
    std::cerr << "warning: " << skipped << " fold(s) skipped\n";
    return 2;
  }
  return 0;
}

int cmd_diagnose(const Options& o) {
  if (o.input.gmm_sets.size() > 1) throw wcv::Error(wcv::ErrorCode::InvalidInput, "diagnose takes a single GMM set");
  // Every instance is used for fitting, so the combined scheme clusters all clouds at once.
  std::optional<wcv::GmmBuildConfig> gmm;
  std::vector<wcv::LabeledSample> samples;
  if (o.input.gmm_sets.empty()) {
    gmm = gmm_config(o, o.gmm.scheme, o.gmm.components);
    samples = wcv::build_gmms(load_clouds(o), *gmm);
  } else {
    samples = wcv::io::read_gmm_set(o.input.gmm_sets.front());
  }
  o.eval.otaf.validate(samples.front().distribution.dim());
  const auto cfg = evaluation_config(o);
  const wcv::OtafResult r = wcv::fit(samples, cfg.otaf);
  json config = {{"command", "diagnose"}, {"input", input_json(o)}, {"evaluation", cfg.to_json()}, {"seed", o.seed},
                 {"gmm", gmm ? gmm->to_json() : json(nullptr)}};
  json projection = json::array();
  for (Eigen::Index i = 0; i < r.projection.matrix().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.projection.matrix().cols(); ++j) row.push_back(r.projection.matrix()(i, j));
    projection.push_back(std::move(row));
  }
  json fisher = json::array();
  json grassmann = json::array();
  for (const double x : r.fisher_trace) fisher.push_back(x);
  for (const double x : r.grassmann_trace) grassmann.push_back(std::isnan(x) ? json(nullptr) : json(x));
  const json fit_json = {{"format", "wcv.fit.v1"},
                         {"config", config},
                         {"iterations", r.iterations},
                         {"converged", r.converged},
                         {"best_iteration", r.best_iteration},
                         {"fisher_trace", fisher},
                         {"grassmann_trace", grassmann},
                         {"projection", projection}};
  const fs::path out(o.out);
  const std::string mode = cfg.otaf.orthonormal ? "orthonormal" : "nonorthonormal";
  wcv::io::FileSet files;
  files[out / trace_name("trace", cfg.otaf.orthonormal)] = wcv::io::trace_csv(r, cfg.otaf.orthonormal, config);
  files[out / ("fit_" + mode + ".json")] = wcv::io::dump(fit_json);
  wcv::io::write_files(files);
  std::cout << "iterations " << r.iterations << "  converged " << (r.converged ? "yes" : "no") << "  best ratio "
            << wcv::io::format_double(r.fisher_trace[static_cast<std::size_t>(r.best_iteration)]) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised dimension reduction and classification of distribution-valued instances"};
  app.require_subcommand(1);
  Options o;

  auto* build = app.add_subcommand("build", "Fit one GMM per data cloud and write the set");
  add_input_options(*build, o, false);
  add_gmm_options(*build, o, false);
  add_common_options(*build, o);

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out evaluation; several representations give a grid");
  add_input_options(*evaluate, o, true);
  add_gmm_options(*evaluate, o, true);
  add_otaf_options(*evaluate, o);
  evaluate->add_option("--shape", o.shape, "Pseudo-mixture shape s (default: reduced dimension)");
  evaluate->add_option("--scale", o.scale, "Pseudo-mixture scale b (default: median pairwise distance)");
  evaluate->add_flag("--no-reduce", o.no_reduce, "Classify in the original space");
  add_common_options(*evaluate, o);

  auto* diagnose = app.add_subcommand("diagnose", "Fit OTAF on all instances and export its trace");
  add_input_options(*diagnose, o, true);
  add_gmm_options(*diagnose, o, false);
  add_otaf_options(*diagnose, o);
  add_common_options(*diagnose, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (std::getenv("WCV_THREADS") == nullptr && o.threads > 0) wcv::set_thread_count(o.threads);

  try {
    if (*build) return cmd_build(o);
    if (*evaluate) return cmd_evaluate(o);
    return cmd_diagnose(o);
  } catch (const wcv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
