#include "bayman/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "bayman/errors.hpp"
#include "bayman/log.hpp"

namespace bayman {
namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Json config_json(const ExperimentConfig& cfg) {
  Json j;
  j["paths"] = {{"input", cfg.input_path}, {"out_dir", cfg.out_dir}};
  Json model;
  model["d"] = cfg.model.d;
  model["epsilon"] = cfg.model.epsilon;
  model["delta_d_km"] = cfg.model.delta_d_km;
  model["learning_rate"] = cfg.model.learning_rate;
  model["lambda_theta"] = cfg.model.lambda_theta;
  model["max_seq_len"] = cfg.model.max_seq_len;
  model["epochs"] = cfg.model.epochs;
  model["batch_size"] = cfg.model.batch_size;
  model["tau_hours"] = cfg.model.tau_hours;
  model["ablation"] = ablation_name(cfg.model.ablation);
  model["seed"] = cfg.model.seed;
  j["model"] = std::move(model);
  j["split"] = {{"train_frac", cfg.train_frac}};
  Json perturb;
  perturb["mode"] = to_string(cfg.perturb_mode);
  perturb["ratio"] = cfg.perturb_ratio;
  perturb["k"] = cfg.perturb_k;
  perturb["per_user"] = cfg.perturb_per_user;
  perturb["train_only"] = cfg.perturb_train_only;
  perturb["seed"] = cfg.perturbation().seed;
  j["perturb"] = std::move(perturb);
  Json eval;
  eval["k_list"] = cfg.k_list;
  eval["baseline_popularity"] = cfg.baseline_popularity;
  eval["baseline_markov"] = cfg.baseline_markov;
  j["eval"] = std::move(eval);
  return j;
}

Json metrics_json(const std::vector<int>& k_list, const std::vector<double>& recall,
                  const std::vector<double>& ndcg) {
  Json j;
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    j["recall@" + std::to_string(k_list[i])] = recall[i];
  }
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    j["ndcg@" + std::to_string(k_list[i])] = ndcg[i];
  }
  return j;
}

/// Training prefixes only, as their own dataset (for train-only corruption).
Dataset train_portion(const DatasetSplit& split) {
  Dataset out;
  out.catalog = split.data.catalog;
  for (int u = 0; u < split.data.num_users(); ++u) {
    const auto train = split.train(u);
    UserSequence seq;
    seq.user = static_cast<int>(out.sequences.size());
    seq.visits.assign(train.begin(), train.end());
    out.sequences.push_back(std::move(seq));
    out.user_ids.push_back(split.data.user_ids[u]);
  }
  return out;
}

}  // namespace

std::string MetricsReport::to_json() const {
  Json j;
  j["config"] = config_json(config);
  Json perturb;
  perturb["mode"] = bayman::to_string(perturbation.mode);
  perturb["ratio"] = perturbation.ratio;
  perturb["K"] = perturbation.neighbor_count;
  perturb["seed"] = perturbation.seed;
  perturb["removed_count"] = perturbation.removed_count;
  perturb["replaced_count"] = perturbation.replaced_count;
  j["perturbation"] = std::move(perturb);
  j["metrics"] = metrics_json(k_list, recall, ndcg);
  j["loss_curve"] = loss_curve;
  if (popularity_recall || markov_recall) {
    Json baselines;
    if (popularity_recall) {
      baselines["popularity"] = metrics_json(k_list, *popularity_recall, *popularity_ndcg);
    }
    if (markov_recall) {
      baselines["markov"] = metrics_json(k_list, *markov_recall, *markov_ndcg);
    }
    j["baselines"] = std::move(baselines);
  }
  return j.dump(2) + "\n";
}

std::string MetricsReport::csv_header(const std::vector<int>& k_list) {
  std::string out = "ablation,perturb_mode,perturb_ratio,perturb_k,seed";
  for (int k : k_list) out += ",recall@" + std::to_string(k);
  for (int k : k_list) out += ",ndcg@" + std::to_string(k);
  return out;
}

std::string MetricsReport::csv_row() const {
  std::string out = ablation_name(config.model.ablation);
  out += ",";
  out += bayman::to_string(perturbation.mode);
  out += "," + fmt(perturbation.ratio);
  out += "," + std::to_string(perturbation.neighbor_count);
  out += "," + std::to_string(config.model.seed);
  for (double r : recall) out += "," + fmt(r);
  for (double n : ndcg) out += "," + fmt(n);
  return out;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  return prepare_data(cfg, ingest_file(cfg.input_path));
}

PreparedData prepare_data(const ExperimentConfig& cfg, const Dataset& raw) {
  cfg.validate();
  const PerturbationSpec spec = cfg.perturbation();
  PreparedData out;

  if (spec.mode == PerturbMode::None || !cfg.perturb_train_only) {
    PerturbResult res = perturb(raw, spec);
    out.perturbation = std::move(res.summary);
    const Dataset usable = drop_unsplittable_users(res.dataset, cfg.train_frac);
    if (usable.num_users() == 0) throw std::runtime_error("prepare_data: no usable users");
    out.split = split_dataset(usable, cfg.train_frac);
    return out;
  }

  // Corrupt only the training portion: split first, perturb the prefix
  // dataset, then stitch each user's perturbed prefix to the original
  // test suffix. The split boundary is carried over explicitly.
  const Dataset base = drop_unsplittable_users(raw, cfg.train_frac);
  if (base.num_users() == 0) throw std::runtime_error("prepare_data: no usable users");
  const DatasetSplit base_split = split_dataset(base, cfg.train_frac);
  PerturbResult res = perturb(train_portion(base_split), spec);
  out.perturbation = std::move(res.summary);

  std::unordered_map<std::string, int> perturbed_user;
  for (int u = 0; u < res.dataset.num_users(); ++u) {
    perturbed_user.emplace(res.dataset.user_ids[u], u);
  }

  Dataset stitched;
  stitched.catalog = base.catalog;
  std::vector<int> train_len;
  for (int u = 0; u < base.num_users(); ++u) {
    const auto it = perturbed_user.find(base.user_ids[u]);
    if (it == perturbed_user.end()) {
      log_warn("user " + base.user_ids[u] + " lost the whole training prefix, dropped");
      continue;
    }
    UserSequence seq;
    seq.user = static_cast<int>(stitched.sequences.size());
    const auto& prefix = res.dataset.sequences[it->second].visits;
    seq.visits = prefix;
    const auto test = base_split.test(u);
    seq.visits.insert(seq.visits.end(), test.begin(), test.end());
    stitched.sequences.push_back(std::move(seq));
    stitched.user_ids.push_back(base.user_ids[u]);
    train_len.push_back(static_cast<int>(prefix.size()));
  }
  if (stitched.num_users() == 0) throw std::runtime_error("prepare_data: no usable users");
  out.split.data = std::move(stitched);
  out.split.train_len = std::move(train_len);
  return out;
}

MetricsReport evaluate_model(const ExperimentConfig& cfg, const ModelParams& params,
                             const DatasetSplit& split) {
  const RunContext ctx = build_run_context(split, cfg.model, /*include_observed_nodes=*/true);
  const std::vector<TrainingExample> examples =
      make_examples(split, cfg.model.max_seq_len, ExampleStage::Test);

  MetricsAccumulator model_acc(cfg.k_list);
  std::optional<MetricsAccumulator> pop_acc, markov_acc;
  std::optional<PopularityRanker> popularity;
  std::optional<MarkovRanker> markov;
  if (cfg.baseline_popularity) {
    popularity = PopularityRanker::fit(split);
    pop_acc.emplace(cfg.k_list);
  }
  if (cfg.baseline_markov) {
    markov = MarkovRanker::fit(split);
    markov_acc.emplace(cfg.k_list);
  }

  const std::size_t batch = static_cast<std::size_t>(cfg.model.batch_size);
  for (std::size_t start = 0; start < examples.size(); start += batch) {
    const std::size_t end = std::min(examples.size(), start + batch);
    Tape tape;
    const ParamTensors pt = make_leaves(tape, params, /*requires_grad=*/false);
    const GlobalEncode global = encode_global(tape, pt, ctx, cfg.model.ablation);
    std::unordered_map<int, PersonalEncode> personal_cache;
    for (std::size_t i = start; i < end; ++i) {
      const TrainingExample& ex = examples[i];
      auto it = personal_cache.find(ex.user);
      if (it == personal_cache.end()) {
        it = personal_cache
                 .emplace(ex.user,
                          encode_personal(tape, pt, ctx.users[static_cast<std::size_t>(ex.user)]))
                 .first;
      }
      const UserForwardState state =
          forward_from_encodes(tape, pt, ctx, cfg.model, ex.user, ex.history, it->second, global);
      const std::vector<int> ranked = rank_pois(state.y_hat.value());
      model_acc.add(ranked, ex.target_poi);
      if (pop_acc) pop_acc->add(popularity->rank(), ex.target_poi);
      if (markov_acc) markov_acc->add(markov->rank(ex.history.back().poi), ex.target_poi);
    }
  }

  MetricsReport report;
  report.config = cfg;
  report.k_list = cfg.k_list;
  report.recall = model_acc.recall();
  report.ndcg = model_acc.ndcg();
  if (pop_acc) {
    report.popularity_recall = pop_acc->recall();
    report.popularity_ndcg = pop_acc->ndcg();
  }
  if (markov_acc) {
    report.markov_recall = markov_acc->recall();
    report.markov_ndcg = markov_acc->ndcg();
  }
  return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, ingest_file(cfg.input_path));
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& raw) {
  PreparedData data = prepare_data(cfg, raw);
  const TrainResult trained = train_model(data.split, cfg.model);
  MetricsReport report = evaluate_model(cfg, trained.params, data.split);
  report.perturbation = data.perturbation;
  report.loss_curve = trained.loss_curve;
  return report;
}

std::vector<MetricsReport> run_ablation(const ExperimentConfig& cfg, const Dataset* raw) {
  std::optional<Dataset> owned;
  if (!raw) {
    owned = ingest_file(cfg.input_path);
    raw = &*owned;
  }
  std::vector<MetricsReport> reports;
  for (const char* variant : kAblationVariants) {
    ExperimentConfig variant_cfg = cfg;
    variant_cfg.model.ablation = ablation_from_name(variant);
    log_info(std::string("ablation variant ") + variant);
    reports.push_back(run_experiment(variant_cfg, *raw));
  }
  return reports;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "r_delete") return SweepAxis::RDelete;
  if (name == "r_replace") return SweepAxis::RReplace;
  if (name == "r_mixed") return SweepAxis::RMixed;
  if (name == "topK_replace") return SweepAxis::TopKReplace;
  if (name == "delta_d") return SweepAxis::DeltaD;
  if (name == "epsilon") return SweepAxis::Epsilon;
  throw ConfigError("unknown sweep axis: " + name);
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::RDelete: return "r_delete";
    case SweepAxis::RReplace: return "r_replace";
    case SweepAxis::RMixed: return "r_mixed";
    case SweepAxis::TopKReplace: return "topK_replace";
    case SweepAxis::DeltaD: return "delta_d";
    case SweepAxis::Epsilon: return "epsilon";
  }
  return "?";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  ExperimentConfig out = cfg;
  switch (axis) {
    case SweepAxis::RDelete:
      out.perturb_mode = PerturbMode::Delete;
      out.perturb_ratio = value;
      break;
    case SweepAxis::RReplace:
      out.perturb_mode = PerturbMode::Replace;
      out.perturb_ratio = value;
      break;
    case SweepAxis::RMixed:
      out.perturb_mode = PerturbMode::Mixed;
      out.perturb_ratio = value;
      break;
    case SweepAxis::TopKReplace:
      out.perturb_mode = PerturbMode::Replace;
      out.perturb_k = static_cast<int>(value);
      if (out.perturb_ratio == 0.0) out.perturb_ratio = 0.1;
      break;
    case SweepAxis::DeltaD:
      out.model.delta_d_km = value;
      break;
    case SweepAxis::Epsilon:
      out.model.epsilon = value;
      break;
  }
  return out;
}

std::string SweepResult::to_csv() const {
  std::string out = "axis,value," + MetricsReport::csv_header(reports.empty()
                                                                  ? std::vector<int>{5, 10}
                                                                  : reports.front().k_list);
  out += "\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out += std::string(bayman::to_string(axis)) + "," + fmt(values[i]) + "," +
           reports[i].csv_row() + "\n";
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                      const std::vector<double>& values, const Dataset* raw) {
  if (values.empty()) throw ConfigError("sweep: empty value list");
  std::optional<Dataset> owned;
  if (!raw) {
    owned = ingest_file(cfg.input_path);
    raw = &*owned;
  }

  SweepResult result;
  result.axis = axis;
  result.values = values;
  result.reports.resize(values.size());

  std::size_t threads = 1;
  if (const char* env = std::getenv("BAYMAN_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 1) threads = static_cast<std::size_t>(parsed);
  }
  threads = std::min(threads, values.size());

  if (threads <= 1) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      log_info("sweep " + std::string(bayman::to_string(axis)) + " = " + fmt(values[i]));
      result.reports[i] = run_experiment(apply_sweep_value(cfg, axis, values[i]), *raw);
    }
    return result;
  }

  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < values.size(); i += threads) {
          result.reports[i] = run_experiment(apply_sweep_value(cfg, axis, values[i]), *raw);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace bayman
