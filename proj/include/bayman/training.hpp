#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bayman/checkin_data.hpp"
#include "bayman/model.hpp"

namespace bayman {

/// One next-POI prediction task: predict target_poi from the history window.
struct TrainingExample {
  int user = -1;
  std::vector<Visit> history;  // at most max_seq_len, chronological
  int target_poi = -1;
  std::int64_t target_ts = 0;
};

enum class ExampleStage { Train, Test };

/// Train stage: every position p >= 2 of each user's training prefix becomes
/// a target with the preceding (up to max_len) check-ins as history. Test
/// stage: every test check-in becomes a target; its history is drawn from
/// the full observed sequence before it.
std::vector<TrainingExample> make_examples(const DatasetSplit& split, int max_len,
                                           ExampleStage stage);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers aligned with ModelParams::entries() order.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long long step = 0;

  static AdamState init_like(const ModelParams& params);
};

/// Standard bias-corrected Adam update, in place.
void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double lr, const AdamConfig& adam = {});

struct TrainResult {
  ModelParams params;
  AdamState adam;
  std::vector<double> loss_curve;  // mean per-example objective per epoch
  int epochs_done = 0;
};

struct ResumeState {
  ModelParams params;
  AdamState adam;
  int next_epoch = 0;
};

/// Full optimization loop: builds graphs and augmentations once, then runs
/// config.epochs over shuffled batches (shuffle order derived from
/// (seed, epoch), so interrupted runs resume identically). Aborts with a
/// diagnostic on a non-finite loss.
TrainResult train_model(const DatasetSplit& split, const ModelConfig& config,
                        const std::optional<ResumeState>& resume = std::nullopt);

/// Variant reusing an already-built context (must match the config).
TrainResult train_model(const DatasetSplit& split, const ModelConfig& config,
                        const RunContext& ctx,
                        const std::optional<ResumeState>& resume = std::nullopt);

}  // namespace bayman
