#include "drmn/cli.hpp"

#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "drmn/cluster.hpp"
#include "drmn/config.hpp"
#include "drmn/dataset.hpp"
#include "drmn/dtf.hpp"
#include "drmn/errors.hpp"
#include "drmn/format.hpp"
#include "drmn/metrics.hpp"
#include "drmn/train.hpp"

namespace drmn {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string problem;
  std::size_t round = 0;
  bool round_set = false;
};

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config.empty() ? parse_run_config("", "defaults") : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void require(const std::string& value, const char* flag, const char* cmd) {
  if (value.empty()) throw ConfigError(std::string(cmd) + " needs " + flag);
}

/// Seeds of the independent streams derived from the run seed.
struct RunSeeds {
  std::uint64_t init, train;
};

RunSeeds run_seeds(std::uint64_t seed) {
  const RngState root(seed);
  return {root.fork(1).seed(), root.fork(2).seed()};
}

int cmd_show_config(const Options& o, std::ostream& out) {
  out << resolve_config(o).to_text();
  return kExitOk;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  require(o.out, "--out", "gen-data");
  const RunConfig cfg = resolve_config(o);
  const Dataset d = generate_dataset(cfg.scene, cfg.noise_sigma, cfg.scenes, cfg.seed);
  save_dataset(o.out, d);
  out << "wrote " << d.samples.size() << " scenes to " << o.out << "\n";
  return kExitOk;
}

void check_compatible(const ModelConfig& m, const Dataset& d, const std::string& where) {
  const SceneConfig& s = d.scene_config;
  if (s.height != m.height || s.width != m.width || s.channels != m.channels || s.phrase_dim != m.phrase_dim) {
    throw ConfigError(where + ": dataset is " + std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
                      std::to_string(s.channels) + " (d = " + std::to_string(s.phrase_dim) + "), model expects " +
                      std::to_string(m.height) + "x" + std::to_string(m.width) + "x" + std::to_string(m.channels) +
                      " (d = " + std::to_string(m.phrase_dim) + ")");
  }
}

int cmd_train(const Options& o, std::ostream& out) {
  require(o.data, "--data", "train");
  require(o.out, "--out", "train");
  RunConfig cfg = resolve_config(o);
  const Dataset data = load_dataset(o.data);
  check_compatible(cfg.model, data, o.data);
  const RunSeeds seeds = run_seeds(cfg.seed);
  cfg.train.seed = seeds.train;
  RngState init_rng(seeds.init);
  Model model = Model::init(cfg.model, init_rng);

  const fs::path dir(o.out);
  make_dir(dir);
  const auto trace = train(model, data.samples, cfg.train);
  model.save(dir / "checkpoint");
  write_file(dir / "loss_trace.csv", loss_trace_csv(trace));
  nlohmann::json run = {{"k", cfg.model.topk},
                        {"rounds", cfg.model.rounds},
                        {"encoder_layers", cfg.model.encoder_layers},
                        {"sharing", to_string(cfg.model.sharing)},
                        {"seed", cfg.seed},
                        {"init_seed", seeds.init},
                        {"train_seed", seeds.train},
                        {"data_seed", data.seed},
                        {"scenes", data.samples.size()},
                        {"steps", trace.size()},
                        {"parameters", model.parameter_count()},
                        {"model", cfg.model.to_json()},
                        {"config", cfg.to_json()}};
  write_file(dir / "run.json", run.dump(2) + "\n");
  out << "trained " << trace.size() << " steps";
  if (!trace.empty()) out << ", final loss " << format_double(trace.back().total);
  out << "\n";
  return kExitOk;
}

std::string metrics_row(std::size_t round, const CategoryCurves& c) {
  return std::to_string(round) + "," + format_double(100.0 * c.overall.area) + "," +
         format_double(100.0 * c.things.area) + "," + format_double(100.0 * c.stuff.area) + "," +
         format_double(100.0 * c.singulars.area) + "," + format_double(100.0 * c.plurals.area) + "," +
         std::to_string(c.overall.count) + "\n";
}

int cmd_eval(const Options& o, std::ostream& out) {
  require(o.checkpoint, "--checkpoint", "eval");
  require(o.data, "--data", "eval");
  require(o.out, "--out", "eval");
  const RunConfig cfg = resolve_config(o);
  const Model model = Model::load(o.checkpoint);
  const Dataset data = load_dataset(o.data);
  check_compatible(model.config, data, o.data);
  const auto rounds = evaluate(model, data.samples, cfg.threshold);
  const auto thresholds = default_thresholds();

  const fs::path dir(o.out);
  make_dir(dir);
  std::string metrics = "round,overall,things,stuff,singulars,plurals,phrases\n";
  std::string ious = "round,scene,phrase,stuff,plural,iou\n";
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const CategoryCurves c = average_recall(rounds[r], thresholds);
    metrics += metrics_row(r, c);
    for (const auto& rec : rounds[r]) {
      ious += std::to_string(r) + "," + std::to_string(rec.scene) + "," + std::to_string(rec.phrase) + "," +
              (rec.stuff ? "1" : "0") + "," + (rec.plural ? "1" : "0") + "," + format_double(rec.iou) + "\n";
    }
    write_file(dir / ("curves_round_" + std::to_string(r) + ".csv"), curves_csv(c));
  }
  write_file(dir / "metrics.csv", metrics);
  write_file(dir / "ious.csv", ious);
  out << metrics;
  return kExitOk;
}

int cmd_curves(const Options& o, std::ostream& out) {
  require(o.checkpoint, "--checkpoint", "curves");
  require(o.data, "--data", "curves");
  const RunConfig cfg = resolve_config(o);
  const Model model = Model::load(o.checkpoint);
  const Dataset data = load_dataset(o.data);
  check_compatible(model.config, data, o.data);
  const std::size_t round = o.round_set ? o.round : model.config.rounds;
  if (round > model.config.rounds) {
    throw ConfigError("--round " + std::to_string(round) + " exceeds the model's " +
                      std::to_string(model.config.rounds) + " rounds");
  }
  const auto rounds = evaluate(model, data.samples, cfg.threshold);
  const std::string csv = curves_csv(average_recall(rounds[round], default_thresholds()));
  if (o.out.empty()) {
    out << csv;
  } else {
    make_dir(fs::path(o.out).parent_path().empty() ? fs::path(".") : fs::path(o.out).parent_path());
    write_file(o.out, csv);
  }
  return kExitOk;
}

int cmd_oracle(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.problem, "a problem file", "oracle");
  const ClusterProblem p = parse_cluster_problem(read_file(o.problem));
  const ClusterTrace tr = alternate(p);
  const std::string csv = cluster_trace_csv(tr);
  if (o.out.empty()) {
    out << csv;
  } else {
    write_file(o.out, csv);
  }
  const double worst = max_increase(tr.objective);
  if (worst > 1e-12) {
    err << "objective increased by " << format_double(worst) << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phrase-to-pixel grounding with deformable attention and top-k refinement", "drmn"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration file (key = value)");
    sub->add_option("--seed", seed, "Override the run seed");
  };

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");
  add_common(show);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen);
  gen->add_option("--out", o.out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  add_common(tr);
  tr->add_option("--data", o.data, "Dataset directory")->required();
  tr->add_option("--out", o.out, "Output directory")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  ev->add_option("--data", o.data, "Dataset directory")->required();
  ev->add_option("--out", o.out, "Output directory")->required();

  auto* cu = app.add_subcommand("curves", "Recall curves of one round");
  add_common(cu);
  cu->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  cu->add_option("--data", o.data, "Dataset directory")->required();
  cu->add_option("--out", o.out, "Output CSV (stdout when omitted)");
  auto* round_opt = cu->add_option("--round", o.round, "Round index (default: last)");

  auto* orc = app.add_subcommand("oracle", "Run the alternating clustering solver");
  orc->add_option("problem", o.problem, "Problem JSON")->required();
  orc->add_option("--out", o.out, "Output CSV (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }
  auto* sub = app.get_subcommands().front();
  if (auto* opt = sub->get_option_no_throw("--seed"); opt && opt->count() > 0) o.seed = seed;
  o.round_set = round_opt->count() > 0;

  try {
    if (sub == show) return cmd_show_config(o, out);
    if (sub == gen) return cmd_gen_data(o, out);
    if (sub == tr) return cmd_train(o, out);
    if (sub == ev) return cmd_eval(o, out);
    if (sub == cu) return cmd_curves(o, out);
    if (sub == orc) return cmd_oracle(o, out, err);
  } catch (const DivergenceError& e) {
    err << "error: training diverged at step " << e.step() << ": " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace drmn
