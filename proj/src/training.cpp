#include "bayman/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "bayman/log.hpp"
#include "bayman/rng.hpp"

namespace bayman {

std::vector<TrainingExample> make_examples(const DatasetSplit& split, int max_len,
                                           ExampleStage stage) {
  if (max_len < 1) throw std::invalid_argument("make_examples: max_len must be >= 1");
  std::vector<TrainingExample> examples;
  for (int u = 0; u < split.data.num_users(); ++u) {
    if (stage == ExampleStage::Train) {
      const auto train = split.train(u);
      for (std::size_t p = 1; p < train.size(); ++p) {
        TrainingExample ex;
        ex.user = u;
        const std::size_t start = p > static_cast<std::size_t>(max_len)
                                      ? p - static_cast<std::size_t>(max_len)
                                      : 0;
        ex.history.assign(train.begin() + static_cast<std::ptrdiff_t>(start),
                          train.begin() + static_cast<std::ptrdiff_t>(p));
        ex.target_poi = train[p].poi;
        ex.target_ts = train[p].timestamp;
        examples.push_back(std::move(ex));
      }
    } else {
      const auto& full = split.data.sequences[u].visits;
      const std::size_t train_n = static_cast<std::size_t>(split.train_len[u]);
      for (std::size_t p = train_n; p < full.size(); ++p) {
        if (p == 0) continue;  // a test check-in with no observed history
        TrainingExample ex;
        ex.user = u;
        const std::size_t start = p > static_cast<std::size_t>(max_len)
                                      ? p - static_cast<std::size_t>(max_len)
                                      : 0;
        ex.history.assign(full.begin() + static_cast<std::ptrdiff_t>(start),
                          full.begin() + static_cast<std::ptrdiff_t>(p));
        ex.target_poi = full[p].poi;
        ex.target_ts = full[p].timestamp;
        examples.push_back(std::move(ex));
      }
    }
  }
  return examples;
}

AdamState AdamState::init_like(const ModelParams& params) {
  AdamState state;
  for (const auto& [name, w] : params.entries()) {
    state.m.push_back(Matrix::Zero(w->rows(), w->cols()));
    state.v.push_back(Matrix::Zero(w->rows(), w->cols()));
  }
  return state;
}

void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double lr, const AdamConfig& adam) {
  auto entries = params.entries();
  if (grads.size() != entries.size() || state.m.size() != entries.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Matrix& w = *entries[i].second;
    const Matrix& g = grads[i];
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + entries[i].first);
    }
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = (adam.beta2 * v.array() + (1.0 - adam.beta2) * g.array().square()).matrix();
    w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + adam.eps);
  }
}

namespace {

struct EpochStats {
  double loss_sum = 0.0;
  std::size_t examples = 0;
};

}  // namespace

TrainResult train_model(const DatasetSplit& split, const ModelConfig& config,
                        const std::optional<ResumeState>& resume) {
  const RunContext ctx = build_run_context(split, config, /*include_observed_nodes=*/false);
  return train_model(split, config, ctx, resume);
}

TrainResult train_model(const DatasetSplit& split, const ModelConfig& config,
                        const RunContext& ctx, const std::optional<ResumeState>& resume) {
  config.validate();
  TrainResult result;
  int first_epoch = 0;
  if (resume) {
    result.params = resume->params;
    result.adam = resume->adam;
    first_epoch = resume->next_epoch;
  } else {
    result.params = ModelParams::init(split.data.num_pois(), config.d,
                                      derive_seed(config.seed, "init"));
    result.adam = AdamState::init_like(result.params);
  }

  std::vector<TrainingExample> examples =
      make_examples(split, config.max_seq_len, ExampleStage::Train);
  if (examples.empty() && config.epochs > first_epoch) {
    throw std::runtime_error("train_model: no training examples");
  }

  const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");
  std::vector<std::size_t> order(examples.size());

  for (int epoch = first_epoch; epoch < config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    EpochStats stats;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const std::size_t batch_n = batch_end - batch_start;

      Tape tape;
      ParamTensors pt = make_leaves(tape, result.params, /*requires_grad=*/true);
      const GlobalEncode global = encode_global(tape, pt, ctx, config.ablation);
      std::unordered_map<int, PersonalEncode> personal_cache;

      Tensor data_sum = tape.scalar(0.0);
      for (std::size_t k = batch_start; k < batch_end; ++k) {
        const TrainingExample& ex = examples[order[k]];
        auto it = personal_cache.find(ex.user);
        if (it == personal_cache.end()) {
          it = personal_cache
                   .emplace(ex.user, encode_personal(tape, pt, ctx.users[static_cast<std::size_t>(
                                                                   ex.user)]))
                   .first;
        }
        const UserForwardState state = forward_from_encodes(
            tape, pt, ctx, config, ex.user, ex.history, it->second, global);
        const Tensor ex_loss = bce_loss(tape, state.y_hat, ex.target_poi);
        const double ex_loss_value = ex_loss.value()(0, 0);
        if (!std::isfinite(ex_loss_value)) {
          throw std::runtime_error(
              "train_model: non-finite loss at epoch " + std::to_string(epoch) + ", user " +
              split.data.user_ids[static_cast<std::size_t>(ex.user)] + ", target poi " +
              std::to_string(ex.target_poi));
        }
        data_sum = add(data_sum, ex_loss);
      }

      // Mean data loss over the batch plus one regularization term: the
      // per-example objective includes the same penalty, so the mean of the
      // per-example objectives equals this quantity.
      const Tensor reg = l2_penalty(tape, pt, config.lambda_theta);
      const Tensor batch_loss =
          add(scale(data_sum, 1.0 / static_cast<double>(batch_n)), reg);
      tape.backward(batch_loss);

      std::vector<Matrix> grads;
      grads.reserve(pt.all.size());
      for (const Tensor& leaf : pt.all) grads.push_back(leaf.grad());
      adam_step(result.params, grads, result.adam, config.learning_rate);

      stats.loss_sum += batch_loss.value()(0, 0) * static_cast<double>(batch_n);
      stats.examples += batch_n;
    }

    const double epoch_loss =
        stats.examples == 0 ? 0.0 : stats.loss_sum / static_cast<double>(stats.examples);
    result.loss_curve.push_back(epoch_loss);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - epoch_start)
                             .count();
    log_info("epoch " + std::to_string(epoch) + ": loss " + std::to_string(epoch_loss) + " (" +
             std::to_string(elapsed) + " ms)");
  }
  result.epochs_done = config.epochs;
  return result;
}

}  // namespace bayman
