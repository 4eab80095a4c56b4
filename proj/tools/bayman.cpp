// Command-line driver: ingest, perturb, train, eval, ablate, sweep.
//
// Exit codes: 0 success, 2 flag/usage errors, 3 missing files,
// 4 config validation failures, 1 anything else.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bayman/checkpoint.hpp"
#include "bayman/errors.hpp"
#include "bayman/experiments.hpp"
#include "bayman/log.hpp"

namespace fs = std::filesystem;
using namespace bayman;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string loss_curve_csv(const std::vector<double>& curve) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out += std::to_string(i) + "," + fmt(curve[i]) + "\n";
  }
  return out;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const char* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), last, v);
    if (ec != std::errc{} || ptr != last) {
      throw ConfigError("sweep: unparsable value '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_k_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    const char* last = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), last, v);
    if (ec != std::errc{} || ptr != last) throw ConfigError("eval: unparsable k '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingFileError("no such file: " + path);
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                             const std::optional<std::string>& out_dir) {
  require_file(path);
  ExperimentConfig cfg = ExperimentConfig::from_file(path);
  if (seed) cfg.model.seed = *seed;
  if (out_dir) cfg.out_dir = *out_dir;
  cfg.validate();
  return cfg;
}

void dump_graphs(const ExperimentConfig& cfg, const DatasetSplit& split, const fs::path& dir) {
  const RunContext ctx = build_run_context(split, cfg.model, /*include_observed_nodes=*/false);
  fs::create_directories(dir);
  auto dump = [&dir](const WeightedDigraph& g, const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    write_edge_list(g, out);
  };
  if (ctx.semantic_graph.size() > 0) dump(ctx.semantic_graph, "semantic.edges");
  if (ctx.distance_graph.size() > 0) dump(ctx.distance_graph, "distance.edges");
  for (int u = 0; u < split.data.num_users(); ++u) {
    const PersonalBundle& bundle = ctx.users[static_cast<std::size_t>(u)];
    const std::string id = split.data.user_ids[u];
    dump(bundle.base_graph, "user_" + id + ".edges");
    dump(bundle.augmented_graph, "user_" + id + ".augmented.edges");
    AugmentedGraph aug;
    aug.graph = bundle.augmented_graph;
    aug.copy_source = bundle.copy_source;
    std::ofstream prov(dir / ("user_" + id + ".zeta.json"), std::ios::binary);
    const auto train = split.train(u);
    const auto matched_train =
        bundle.match ? split.train(bundle.match->matched) : std::span<const Visit>{};
    write_augmentation_provenance(aug, train, matched_train, prov);
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Robust next-POI recommendation lab: multi-view POI graphs, posterior-guided "
               "graph augmentation, attention-based preference learning, and a data-corruption "
               "harness."};
  app.require_subcommand(1);

  // ingest
  std::string in_path, out_path;
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate and normalize a check-in file");
  ingest_cmd->add_option("--input", in_path, "check-in csv")->required();
  ingest_cmd->add_option("--out", out_path, "normalized output path")->required();

  // perturb
  std::string perturb_in, perturb_out, perturb_mode = "delete";
  double perturb_ratio = 0.1;
  int perturb_k = 1;
  std::uint64_t perturb_seed = 0;
  bool perturb_per_user = false;
  auto* perturb_cmd = app.add_subcommand("perturb", "Write a corrupted copy of a dataset");
  perturb_cmd->add_option("--input", perturb_in, "check-in csv")->required();
  perturb_cmd->add_option("--mode", perturb_mode, "delete|replace|mixed");
  perturb_cmd->add_option("--ratio", perturb_ratio, "corruption ratio r in [0,1]");
  perturb_cmd->add_option("--k", perturb_k, "neighbor count for replacement");
  perturb_cmd->add_option("--seed", perturb_seed, "rng seed");
  perturb_cmd->add_flag("--per-user", perturb_per_user, "stratify the selection per user");
  perturb_cmd->add_option("--out", perturb_out, "output path")->required();

  // train
  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> out_override;
  std::optional<std::string> resume_path;
  bool want_graph_dump = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config");
  train_cmd->add_option("--config", config_path, "experiment config")->required();
  train_cmd->add_option("--seed", seed_override, "override the config seed");
  train_cmd->add_option("--out", out_override, "override the output directory");
  train_cmd->add_option("--resume", resume_path, "checkpoint to resume from");
  train_cmd->add_flag("--dump-graphs", want_graph_dump, "export graph edge lists");

  // eval
  std::string ckpt_path, data_path, k_csv, report_path;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "check-in csv")->required();
  eval_cmd->add_option("--k", k_csv, "comma-separated cutoffs (default from config)");
  eval_cmd->add_option("--out", report_path, "report path (default <out_dir>/report.json)");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Run every ablation variant");
  ablate_cmd->add_option("--config", config_path, "experiment config")->required();
  ablate_cmd->add_option("--seed", seed_override, "override the config seed");
  ablate_cmd->add_option("--out", out_override, "override the output directory");

  // sweep
  std::string axis_name, values_csv;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid-run one hyperparameter axis");
  sweep_cmd->add_option("--config", config_path, "experiment config")->required();
  sweep_cmd->add_option("--axis", axis_name,
                        "r_delete|r_replace|r_mixed|topK_replace|delta_d|epsilon")
      ->required();
  sweep_cmd->add_option("--values", values_csv, "comma-separated grid values")->required();
  sweep_cmd->add_option("--seed", seed_override, "override the config seed");
  sweep_cmd->add_option("--out", out_override, "override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the help text or the usage error
    return code == 0 ? 0 : 2;
  }

  if (*ingest_cmd) {
    require_file(in_path);
    const Dataset ds = ingest_file(in_path);
    serialize_to_file(ds, out_path);
    std::cout << "ingested " << ds.total_records() << " records, " << ds.num_users()
              << " users, " << ds.num_pois() << " pois -> " << out_path << "\n";
    return 0;
  }

  if (*perturb_cmd) {
    require_file(perturb_in);
    PerturbationSpec spec;
    spec.mode = perturb_mode_from_string(perturb_mode);
    spec.ratio = perturb_ratio;
    spec.neighbor_count = perturb_k;
    spec.seed = perturb_seed;
    spec.per_user = perturb_per_user;
    spec.validate();
    const Dataset ds = ingest_file(perturb_in);
    const PerturbResult res = perturb(ds, spec);
    serialize_to_file(res.dataset, perturb_out);
    write_file(perturb_out + ".manifest.json", manifest_json(res.summary));
    std::cout << "perturbed: removed " << res.summary.removed_count << ", replaced "
              << res.summary.replaced_count << " -> " << perturb_out << "\n";
    return 0;
  }

  if (*train_cmd) {
    ExperimentConfig cfg = load_config(config_path, seed_override, out_override);
    require_file(cfg.input_path);
    PreparedData data = prepare_data(cfg);
    std::optional<ResumeState> resume;
    if (resume_path) {
      require_file(*resume_path);
      Checkpoint prev = load_checkpoint(*resume_path);
      if (!prev.adam) throw std::runtime_error("resume: checkpoint has no optimizer state");
      resume = ResumeState{std::move(prev.params), std::move(*prev.adam), prev.next_epoch};
    }
    const TrainResult trained = train_model(data.split, cfg.model, resume);

    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    Checkpoint ckpt{cfg, trained.params, trained.adam, trained.epochs_done};
    const fs::path ckpt_file = out_dir / "checkpoint.ckpt";
    save_checkpoint(ckpt, ckpt_file.string());
    write_file(out_dir / "loss_curve.csv", loss_curve_csv(trained.loss_curve));
    if (want_graph_dump) dump_graphs(cfg, data.split, out_dir / "graphs");
    std::cout << "checkpoint: " << ckpt_file.string() << "\n";
    return 0;
  }

  if (*eval_cmd) {
    require_file(ckpt_path);
    require_file(data_path);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    ExperimentConfig cfg = ckpt.config;
    cfg.input_path = data_path;
    if (!k_csv.empty()) cfg.k_list = parse_k_list(k_csv);
    cfg.validate();

    PreparedData data = prepare_data(cfg);
    MetricsReport report = evaluate_model(cfg, ckpt.params, data.split);
    report.perturbation = data.perturbation;

    const fs::path out = report_path.empty() ? fs::path(cfg.out_dir) / "report.json"
                                             : fs::path(report_path);
    write_file(out, report.to_json());
    write_file(fs::path(out).replace_extension(".csv"),
               MetricsReport::csv_header(report.k_list) + "\n" + report.csv_row() + "\n");
    std::cout << report.to_json();
    return 0;
  }

  if (*ablate_cmd) {
    ExperimentConfig cfg = load_config(config_path, seed_override, out_override);
    require_file(cfg.input_path);
    const std::vector<MetricsReport> reports = run_ablation(cfg);
    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    std::string summary = "variant," + MetricsReport::csv_header(cfg.k_list) + "\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const std::string variant = kAblationVariants[i];
      write_file(out_dir / ("report_" + variant + ".json"), reports[i].to_json());
      summary += variant + "," + reports[i].csv_row() + "\n";
    }
    write_file(out_dir / "ablate_summary.csv", summary);
    std::cout << summary;
    return 0;
  }

  if (*sweep_cmd) {
    ExperimentConfig cfg = load_config(config_path, seed_override, out_override);
    require_file(cfg.input_path);
    const SweepAxis axis = sweep_axis_from_string(axis_name);
    const std::vector<double> values = parse_values(values_csv);
    const SweepResult result = run_sweep(cfg, axis, values);

    const fs::path out_dir(cfg.out_dir);
    fs::create_directories(out_dir);
    const std::string csv = result.to_csv();
    write_file(out_dir / ("sweep_" + std::string(to_string(axis)) + ".csv"), csv);
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
      write_file(
          out_dir / ("sweep_" + std::string(to_string(axis)) + "_" + fmt(values[i]) + ".json"),
          result.reports[i].to_json());
    }
    std::cout << csv;
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (std::getenv("BAYMAN_VERBOSE")) set_log_level(LogLevel::Info);
  try {
    return run_cli(argc, argv);
  } catch (const MissingFileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
