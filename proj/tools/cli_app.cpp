#include "cli_app.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include "uwcsr/config.hpp"
#include "uwcsr/errors.hpp"
#include "uwcsr/experiments.hpp"

namespace uwcsr::cli {

namespace {

namespace fs = std::filesystem;

class StageTimer {
 public:
  explicit StageTimer(RunManifest& m) : manifest_(m) {}
  template <typename F>
  auto run(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      RunManifest& m;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        m.stage_seconds.emplace_back(
            stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
    } record{manifest_, stage, t0};
    return f();
  }

 private:
  RunManifest& manifest_;
};

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const Common& c, RunManifest& manifest, const std::string& command) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (c.seed) cfg.set_seed(*c.seed);
  cfg.validate();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  manifest.command = command;
  manifest.config_path = c.config_path;
  manifest.config_hash = fnv1a64(to_text(cfg));
  manifest.seed = cfg.seed();
  manifest.output = c.out;
  return cfg;
}

void write_manifest(const RunManifest& manifest, const fs::path& out) {
  write_text_file(fs::path(out.string() + ".manifest"), manifest.to_text());
}

int cmd_dataset(const Common& c) {
  RunManifest manifest;
  const RunConfig cfg = resolve_config(c, manifest, "dataset");
  StageTimer timer(manifest);
  const Dataset ds = timer.run("generate", [&] { return generate_dataset(cfg.dataset); });
  timer.run("write", [&] {
    write_dataset(c.out, ds);
    return 0;
  });
  const auto counts = split_counts(ds.records.size(), cfg.dataset.val_fraction, cfg.dataset.test_fraction);
  manifest.fields = {{"n_train", std::to_string(counts.train)},
                     {"n_val", std::to_string(counts.val)},
                     {"n_test", std::to_string(counts.test)}};
  write_manifest(manifest, c.out);
  return 0;
}

struct TrainArgs {
  std::string dataset;
  std::string mode = "individual";
  std::string method = "CSRNet";
  int pilots = 4;
  std::optional<double> snr;
  std::string pretrained;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  RunManifest manifest;
  const RunConfig cfg = resolve_config(c, manifest, "train");
  if (a.pilots != 2 && a.pilots != 4) throw ConfigSemanticError("--pilots must be 2 or 4");
  const Method method = parse_method(a.method);
  if (method != Method::csrnet && method != Method::dnn)
    throw ConfigSemanticError("--method must be CSRNet or DNN");
  if (method == Method::dnn && a.mode == "transfer")
    throw ConfigSemanticError("transfer mode applies to CSRNet only");

  StageTimer timer(manifest);
  const Dataset ds = timer.run("load", [&] { return read_dataset(a.dataset); });
  const auto& grid = ds.spec.snr_grid;

  std::optional<double> subset;
  if (a.mode == "individual") {
    subset = a.snr;
  } else if (a.mode == "pretrain") {
    subset = a.snr.value_or(15.0);
  } else if (a.mode == "transfer") {
    if (a.pretrained.empty()) throw MissingArtifact("transfer mode needs --pretrained");
  } else {
    throw ConfigSemanticError("unknown --mode '" + a.mode + "'");
  }
  if (subset && std::find(grid.begin(), grid.end(), *subset) == grid.end())
    throw ConfigSemanticError("SNR " + std::to_string(*subset) + " dB is not in the dataset grid");

  LossReport report;
  const double factor = ds.spec.scaling_factor;
  manifest.fields = {{"mode", a.mode},
                     {"method", a.method},
                     {"pilots", std::to_string(a.pilots)},
                     {"dataset", a.dataset},
                     {"snr_db", subset ? std::to_string(*subset) : std::string("all")}};

  if (method == Method::csrnet) {
    const auto train = csrnet_training_pairs(ds, Split::train, a.pilots, subset, cfg.loss_weighting);
    const auto val = csrnet_training_pairs(ds, Split::val, a.pilots, subset, cfg.loss_weighting);
    if (train.empty()) throw ConfigSemanticError("no training frames for the requested subset");
    if (a.mode == "transfer") {
      const CsrnetCheckpoint base = load_checkpoint(a.pretrained);
      const auto result =
          timer.run("train", [&] { return transfer_train(base.net, train, val, cfg.training); });
      report = result.report;
      manifest.fields.emplace_back("pretrained", a.pretrained);
      manifest.fields.emplace_back("frozen_layers", std::to_string(result.frozen_layers));
      timer.run("save", [&] {
        save_checkpoint(c.out, result.net, factor);
        return 0;
      });
    } else {
      ConvNetwork net = ConvNetwork::make(cfg.depth, cfg.width, 2, cfg.training.seed, cfg.lrelu_slope);
      report = timer.run("train", [&] { return fit(net, train, val, cfg.training); });
      manifest.fields.emplace_back("frozen_layers", "0");
      timer.run("save", [&] {
        save_checkpoint(c.out, net, factor);
        return 0;
      });
    }
  } else {
    const auto train = mlp_training_samples(ds, Split::train, a.pilots, subset);
    const auto val = mlp_training_samples(ds, Split::val, a.pilots, subset);
    if (train.empty()) throw ConfigSemanticError("no training frames for the requested subset");
    const auto sizes = MlpNetwork::default_sizes(static_cast<std::size_t>(a.pilots), ds.spec.ofdm.n_symbols);
    MlpNetwork net = MlpNetwork::make(sizes, cfg.training.seed, cfg.lrelu_slope);
    report = timer.run("train", [&] { return mlp_fit(net, train, val, cfg.training); });
    timer.run("save", [&] {
      save_mlp_checkpoint(c.out, net, factor);
      return 0;
    });
  }
  manifest.fields.emplace_back("stop_epoch", std::to_string(report.stop_epoch));
  manifest.fields.emplace_back("best_val_epoch", std::to_string(report.best_val_epoch));
  manifest.fields.emplace_back("stop_reason", to_string(report.stop_reason));
  write_text_file(fs::path(c.out + ".loss.csv"), report.to_csv());
  write_manifest(manifest, c.out);
  return 0;
}

struct EvalArgs {
  std::string dataset;
  std::vector<std::string> models;  // LABEL=path
  std::vector<std::string> methods;
  std::vector<double> snr;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  RunManifest manifest;
  const RunConfig cfg = resolve_config(c, manifest, "eval");
  StageTimer timer(manifest);

  std::vector<ExperimentConfig> configs;
  for (const auto& label : a.methods.empty() ? cfg.methods : a.methods) {
    try {
      configs.push_back(ExperimentConfig::parse(label));
    } catch (const std::invalid_argument& e) {
      throw ConfigSemanticError(e.what());
    }
  }

  ModelSet models;
  for (const auto& spec : a.models) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw ConfigSemanticError("--model expects LABEL=path, got '" + spec + "'");
    ExperimentConfig mc;
    try {
      mc = ExperimentConfig::parse(spec.substr(0, eq));
    } catch (const std::invalid_argument& e) {
      throw ConfigSemanticError(e.what());
    }
    const std::string path = spec.substr(eq + 1);
    if (mc.method == Method::csrnet) models.csrnet[mc.n_pilots] = load_checkpoint(path);
    else if (mc.method == Method::dnn) models.dnn[mc.n_pilots] = load_mlp_checkpoint(path);
    else throw ConfigSemanticError("--model only applies to CSRNet and DNN labels");
    manifest.fields.emplace_back("model." + mc.label(), path);
  }
  for (const auto& mc : configs)
    if (!models.has(mc)) throw MissingArtifact("no model given for " + mc.label());

  const Dataset ds = timer.run("load", [&] { return read_dataset(a.dataset); });
  const std::vector<double> grid = a.snr.empty() ? ds.spec.snr_grid : a.snr;
  SuiteOptions options;
  options.bootstrap_resamples = cfg.bootstrap_resamples;
  options.seed = cfg.seed();
  const ResultTable table = timer.run("evaluate", [&] { return run_suite(ds, configs, grid, models, options); });
  write_text_file(c.out, table.to_csv());
  manifest.fields.emplace_back("dataset", a.dataset);
  manifest.fields.emplace_back("rows", std::to_string(table.rows.size()));
  write_manifest(manifest, c.out);
  return 0;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key = value config file");
  sub->add_option("--out", c.out, "output path")->required();
  sub->add_option("--seed", c.seed, "override the config seed");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Underwater acoustic OFDM channel estimation with a residual CNN"};
  app.require_subcommand(1);

  Common dataset_common;
  auto* dataset = app.add_subcommand("dataset", "generate a dataset file");
  add_common(dataset, dataset_common);

  Common train_common;
  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a CSRNet or DNN checkpoint");
  add_common(train, train_common);
  train->add_option("--dataset", train_args.dataset)->required();
  train->add_option("--mode", train_args.mode, "individual | pretrain | transfer");
  train->add_option("--method", train_args.method, "CSRNet | DNN");
  train->add_option("--pilots", train_args.pilots, "2 | 4");
  train->add_option("--snr", train_args.snr, "training SNR subset in dB");
  train->add_option("--pretrained", train_args.pretrained, "checkpoint for transfer mode");

  Common eval_common;
  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate methods and write the result CSV");
  add_common(eval, eval_common);
  eval->add_option("--dataset", eval_args.dataset)->required();
  eval->add_option("--model", eval_args.models, "LABEL=path, repeatable");
  eval->add_option("--method", eval_args.methods, "method labels, overrides the config");
  eval->add_option("--snr", eval_args.snr, "SNR grid override in dB")->delimiter(',');

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*dataset) return cmd_dataset(dataset_common);
    if (*train) return cmd_train(train_common, train_args);
    if (*eval) return cmd_eval(eval_common, eval_args);
  } catch (const ConfigParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigSemanticError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const MissingArtifact& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 5;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace uwcsr::cli
