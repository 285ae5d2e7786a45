#include "more/cli.hpp"

#include "more/core_model.hpp"
#include "more/error.hpp"
#include "more/evaluation.hpp"
#include "more/io.hpp"
#include "more/model_selection.hpp"
#include "more/slices.hpp"
#include "more/synth.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <iostream>
#include <optional>

namespace more::cli {
namespace {

struct Options {
  std::string features, targets, labels, config, out, report, trace, model, predictions,
      geometry, out_dir, csv, assignments;
  std::string model_kind = "more";
  std::string k_list = "1..12";
  std::string preset = "well-separated";
  long experts = 12;
  std::uint64_t seed = 0;
  int folds = 5;
  int restarts = 1;
  int threads = 1;
  long row = 0;
  long samples = 0;
  int n_slices = 23, rows = 51, cols = 61;
  double lambda = 1.0;
  bool hard = false;
};

long parse_long(const std::string& s) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("'" + s + "' is not an integer");
  }
  return v;
}

bool given(const CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

TrainConfig train_config(const Options& o, const CLI::App& sub) {
  TrainConfig cfg;
  if (!o.config.empty()) apply_config_file(o.config, cfg);
  if (given(sub, "--experts")) cfg.num_experts = o.experts;
  if (given(sub, "--seed")) cfg.seed = o.seed;
  if (given(sub, "--threads")) cfg.num_threads = o.threads;
  cfg.validate();
  return cfg;
}

Dataset dataset(const Options& o) {
  return load_dataset(o.features, o.targets,
                      o.labels.empty() ? std::nullopt : std::optional<fs::path>(o.labels));
}

}  // namespace

std::vector<long> parse_k_list(const std::string& text) {
  std::vector<long> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    if (part.empty()) throw ValidationError("empty entry in k-list '" + text + "'");
    if (const auto dots = part.find(".."); dots != std::string::npos) {
      const long lo = parse_long(part.substr(0, dots));
      const long hi = parse_long(part.substr(dots + 2));
      if (lo > hi) throw ValidationError("descending range '" + part + "'");
      for (long k = lo; k <= hi; ++k) out.push_back(k);
    } else {
      out.push_back(parse_long(part));
    }
    start = end + 1;
  }
  for (long k : out) {
    if (k < 1) throw ValidationError("expert counts must be >= 1");
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixture of regression experts encoder"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Fit a mixture of regression experts");
  train->add_option("--features", o.features, "Features CSV (N x k)")->required()->check(CLI::ExistingFile);
  train->add_option("--targets", o.targets, "Targets CSV (N x m)")->required()->check(CLI::ExistingFile);
  train->add_option("--labels", o.labels, "Labels, one per line")->check(CLI::ExistingFile);
  train->add_option("--experts", o.experts, "Number of experts K");
  train->add_option("--config", o.config, "key = value training config")->check(CLI::ExistingFile);
  train->add_option("--seed", o.seed, "Random seed");
  train->add_option("--threads", o.threads, "Worker threads for the E-step");
  train->add_option("--out", o.out, "Model JSON output")->required();
  train->add_option("--report", o.report, "Training report JSON");
  train->add_option("--trace", o.trace, "Log-likelihood trace CSV (iteration,loglik)");

  auto* predict_cmd = app.add_subcommand("predict", "Predict responses for new features");
  predict_cmd->add_option("--model", o.model, "Model JSON")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--features", o.features, "Features CSV")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", o.out, "Predictions CSV (N x m)")->required();
  predict_cmd->add_flag("--hard", o.hard, "Use only the most probable expert");
  predict_cmd->add_option("--assignments", o.assignments, "Write the argmax expert per row");

  auto* evaluate = app.add_subcommand("evaluate", "K-fold cross-validated r^2");
  evaluate->add_option("--features", o.features)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--targets", o.targets)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model-kind", o.model_kind)->check(CLI::IsMember({"more", "ridge"}));
  evaluate->add_option("--folds", o.folds, "Number of folds");
  evaluate->add_option("--seed", o.seed, "Fold and training seed");
  evaluate->add_option("--experts", o.experts, "Number of experts K");
  evaluate->add_option("--config", o.config)->check(CLI::ExistingFile);
  evaluate->add_option("--lambda", o.lambda, "Ridge penalty");
  evaluate->add_option("--threads", o.threads);
  evaluate->add_option("--out", o.out, "Report JSON")->required();
  evaluate->add_option("--csv", o.csv, "One-row summary CSV");

  auto* select = app.add_subcommand("select-k", "Choose K by BIC");
  select->add_option("--features", o.features)->required()->check(CLI::ExistingFile);
  select->add_option("--targets", o.targets)->required()->check(CLI::ExistingFile);
  select->add_option("--k-list", o.k_list, "Candidates, e.g. 1..12");
  select->add_option("--config", o.config)->check(CLI::ExistingFile);
  select->add_option("--seed", o.seed);
  select->add_option("--restarts", o.restarts, "EM restarts per candidate");
  select->add_option("--threads", o.threads);
  select->add_option("--out", o.out, "Sweep CSV")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a random model");
  synth->add_option("--preset", o.preset)->check(CLI::IsMember({"well-separated"}));
  synth->add_option("--seed", o.seed);
  synth->add_option("--samples", o.samples, "Override N");
  synth->add_option("--out-dir", o.out_dir)->required();

  auto* render = app.add_subcommand("render-slices", "Write one PGM per slice for a prediction row");
  render->add_option("--predictions", o.predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
  render->add_option("--row", o.row, "0-based row to render");
  render->add_option("--geometry", o.geometry, "voxel_index,slice,row,col CSV")->required()->check(CLI::ExistingFile);
  render->add_option("--slices", o.n_slices);
  render->add_option("--rows", o.rows);
  render->add_option("--cols", o.cols);
  render->add_option("--out-dir", o.out_dir)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) {
      const Dataset data = dataset(o);
      const TrainConfig cfg = train_config(o, *train);
      const FitResult result = fit(data, cfg);
      save_model(result.model, o.out);
      if (!o.report.empty()) write_file_atomic(o.report, train_report_to_json(result.report));
      if (!o.trace.empty()) write_file_atomic(o.trace, loglik_trace_csv(result.report));
      out << "trained K=" << cfg.num_experts << " iterations=" << result.report.iterations_run
          << " converged=" << (result.report.converged ? "true" : "false")
          << " loglik=" << format_double(result.report.loglik_trace.back()) << "\n";
    } else if (predict_cmd->parsed()) {
      const MoreModel model = load_model(o.model);
      const Matrix inputs = read_matrix_csv(o.features);
      if (inputs.cols() != model.input_dim()) {
        throw ShapeError("features have " + std::to_string(inputs.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
      }
      Matrix pred(inputs.rows(), model.output_dim());
      Matrix experts(inputs.rows(), 1);
      for (Index n = 0; n < inputs.rows(); ++n) {
        const auto hp = hard_predict(model, inputs.row(n).transpose());
        experts(n, 0) = static_cast<double>(hp.expert);
        pred.row(n) = (o.hard ? hp.response : predict(model, inputs.row(n).transpose())).transpose();
      }
      write_matrix_csv(o.out, pred);
      if (!o.assignments.empty()) write_matrix_csv(o.assignments, experts, {"expert"});
      out << "wrote " << pred.rows() << "x" << pred.cols() << " predictions\n";
    } else if (evaluate->parsed()) {
      const Dataset data = dataset(o);
      const ModelKind kind = parse_model_kind(o.model_kind);
      TrainConfig cfg;
      if (kind == ModelKind::more) {
        cfg = train_config(o, *evaluate);
      } else if (evaluate->count("--seed") > 0) {
        cfg.seed = o.seed;
      }
      const FoldSpec folds = make_folds(data.size(), o.folds, o.seed);
      const EvalReport report = cross_validate(data, kind, folds, cfg, o.lambda);
      write_file_atomic(o.out, eval_report_to_json(report));
      if (!o.csv.empty()) write_file_atomic(o.csv, eval_report_csv(report));
      out << report.model_tag << " mean_r2=" << format_double(report.mean_r2) << "\n";
    } else if (select->parsed()) {
      const Dataset data = dataset(o);
      const TrainConfig cfg = train_config(o, *select);
      std::vector<Index> candidates;
      for (long k : parse_k_list(o.k_list)) candidates.push_back(static_cast<Index>(k));
      const BicSweepResult sweep = sweep_experts(data, candidates, cfg, o.restarts);
      write_file_atomic(o.out, sweep_to_csv(sweep));
      out << "best_k=" << sweep.best_k << "\n";
    } else if (synth->parsed()) {
      SynthSpec spec = synth_preset(o.preset, o.seed);
      if (synth->count("--samples") > 0) spec.num_samples = static_cast<Index>(o.samples);
      const SynthResult result = generate(spec);
      const fs::path dir = o.out_dir;
      write_matrix_csv(dir / "features.csv", result.data.inputs);
      write_matrix_csv(dir / "targets.csv", result.data.targets);
      std::string labels;
      for (Index z : result.assignments) labels += "expert_" + std::to_string(z) + "\n";
      write_file_atomic(dir / "labels.txt", labels);
      write_file_atomic(dir / "truth.json", synth_truth_to_json(spec, result));
      out << "wrote " << spec.num_samples << " samples to " << dir.string() << "\n";
    } else if (render->parsed()) {
      const Matrix pred = read_matrix_csv(o.predictions);
      if (o.row < 0 || o.row >= pred.rows()) {
        throw ValidationError("row " + std::to_string(o.row) + " out of range [0, " +
                              std::to_string(pred.rows()) + ")");
      }
      const SliceGeometry geometry = load_geometry(o.geometry, o.n_slices, o.rows, o.cols);
      const auto result = render_slices(pred.row(o.row).transpose(), geometry, o.out_dir);
      out << "wrote " << result.slice_files.size() << " slices to " << o.out_dir << "\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace more::cli
