#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayman/bayes_augmentation.hpp"
#include "bayman/checkin_data.hpp"
#include "bayman/poi_graphs.hpp"
#include "bayman/tensor.hpp"

namespace bayman {

/// Component switches for the ablation variants.
struct AblationFlags {
  bool no_bayes = false;     // drop the augmented personal graph (uses the original twice)
  bool no_global = false;    // drop both global views
  bool no_semantic = false;  // drop the semantic view
  bool no_distance = false;  // drop the distance view
  bool no_time = false;      // zero out the attention time-lag bias

  bool semantic_enabled() const { return !no_global && !no_semantic; }
  bool distance_enabled() const { return !no_global && !no_distance; }
};

AblationFlags ablation_from_name(const std::string& name);  // full|noB|noG|noGs|noGd|noT
std::string ablation_name(const AblationFlags& flags);
extern const char* const kAblationVariants[6];

struct ModelConfig {
  int d = 48;                    // latent dimension
  double epsilon = 0.5;          // replication probability
  double delta_d_km = 1.0;       // distance-graph threshold
  double learning_rate = 0.002;
  double lambda_theta = 1e-5;    // L2 weight
  int max_seq_len = 50;
  int epochs = 100;
  int batch_size = 32;
  double tau_hours = 1.0;        // time-lag scale of the attention bias
  AblationFlags ablation;
  std::uint64_t seed = 42;

  void validate() const;  // throws ConfigError on out-of-range fields
};

/// All trainable tensors. entries() fixes one iteration order used for
/// initialization, optimizer state, checkpoints and gradient checks.
struct ModelParams {
  Matrix embedding;                         // N x d
  Matrix w_u_in, w_u_out;                   // personal GCN weights, d x d
  Matrix w_aug_in, w_aug_out;               // augmented-graph GCN weights
  Matrix w_s_in, w_s_out;                   // semantic GCN weights
  Matrix w_d;                               // distance GCN weight
  Matrix gate_u_in, gate_u_out;             // 1 x d fusion gates
  Matrix gate_aug_in, gate_aug_out;
  Matrix gate_s_in, gate_s_out;
  Matrix w_q, w_k, w_v;                     // time attention projections, 2d x 2d
  Matrix w_qs, w_ks, w_vs;                  // semantic refinement: 2d x d, d x d, d x d
  Matrix w_qd, w_kd, w_vd;                  // distance refinement

  std::vector<std::pair<std::string, Matrix*>> entries();
  std::vector<std::pair<std::string, const Matrix*>> entries() const;
  int latent_dim() const { return static_cast<int>(embedding.cols()); }
  int num_pois() const { return static_cast<int>(embedding.rows()); }

  /// Uniform init in [-1/sqrt(d), 1/sqrt(d)], seeded, entry order fixed.
  static ModelParams init(int num_pois, int d, std::uint64_t seed);
};

/// Per-user graphs aligned on one union node set: the training-prefix
/// transition graph, its augmented counterpart, and their four normalized
/// adjacencies. When built for evaluation the node set also covers POIs
/// observed later in the user's history (as isolated nodes) so gathers
/// stay well defined.
struct PersonalBundle {
  std::vector<int> nodes;              // local -> global poi
  std::unordered_map<int, int> local;  // global poi -> local
  Matrix base_in_hat, base_out_hat;
  Matrix aug_in_hat, aug_out_hat;
  std::optional<LikeMindedMatch> match;
  std::vector<std::optional<int>> copy_source;  // per train position
  WeightedDigraph base_graph;
  WeightedDigraph augmented_graph;

  int local_at(int poi) const;  // throws on a POI outside the union set
};

/// Graphs and normalized adjacencies shared by every forward pass of a run.
struct RunContext {
  int num_pois = 0;
  Matrix sem_in_hat, sem_out_hat;  // empty when the semantic view is off
  Matrix dist_hat;                 // empty when the distance view is off
  WeightedDigraph semantic_graph;
  WeightedDigraph distance_graph;
  std::vector<PersonalBundle> users;
};

/// Builds every graph and augmentation for a run. Personal graphs, matches
/// and posteriors use the training prefixes only; augmentation sampling is
/// keyed by derive_seed(derive_seed(config.seed, "augment"), user).
/// include_observed_nodes extends each union node set with the user's
/// later observed POIs (evaluation-time bundles).
RunContext build_run_context(const DatasetSplit& split, const ModelConfig& config,
                             bool include_observed_nodes);

/// Leaf tensors for one tape, in entries() order.
struct ParamTensors {
  Tensor embedding;
  Tensor w_u_in, w_u_out, w_aug_in, w_aug_out, w_s_in, w_s_out, w_d;
  Tensor gate_u_in, gate_u_out, gate_aug_in, gate_aug_out, gate_s_in, gate_s_out;
  Tensor w_q, w_k, w_v, w_qs, w_ks, w_vs, w_qd, w_kd, w_vd;
  std::vector<Tensor> all;
};
ParamTensors make_leaves(Tape& tape, const ModelParams& params, bool requires_grad = true);

/// Arranges existing leaf tensors (entries() order) into a ParamTensors;
/// used by gradient checks that own the leaves.
ParamTensors bind_leaves(const std::vector<Tensor>& leaves);

/// ReLU(A_hat * H * W).
Tensor gcn_layer(const Tensor& a_hat, const Tensor& h, const Tensor& w);

struct PersonalEncode {
  Tensor h_base;  // |U| x d
  Tensor h_aug;   // |U| x d
  Tensor h_ro;    // |U| x 2d
};
PersonalEncode encode_personal(Tape& tape, const ParamTensors& pt, const PersonalBundle& bundle);

struct GlobalEncode {
  std::optional<Tensor> h_gs;  // N x d
  std::optional<Tensor> h_gd;  // N x d
};
GlobalEncode encode_global(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                           const AblationFlags& flags);

struct AttentionOut {
  Tensor attended;    // L x width
  Tensor preference;  // 1 x width, sum of attended rows
  Tensor weights;     // L x L softmax rows
};

/// Scaled dot-product attention over the gathered trajectory with an
/// additive pairwise bias -|t_i - t_j| / tau (hours), zeroed by no_time.
/// The scale is 1/sqrt of the projection width.
AttentionOut time_aware_attention(Tape& tape, const ParamTensors& pt, const Tensor& h_seq,
                                  std::span<const std::int64_t> timestamps, double tau_hours,
                                  bool no_time);

/// Query from the personal trajectory, keys/values from a global view
/// trajectory; both must cover the same positions.
AttentionOut preference_refine(Tape& tape, const Tensor& w_q, const Tensor& w_k,
                               const Tensor& w_v, const Tensor& h_hat, const Tensor& h_view);

/// z_j = P(u)^T h_ro_j (0 for POIs outside the union set) plus the enabled
/// global terms P_S^T h_GS_j and P_D^T h_GD_j.
Tensor score_all(Tape& tape, const Tensor& p_u, const Tensor& h_ro,
                 const std::vector<int>& union_nodes, const std::optional<Tensor>& p_s,
                 const std::optional<Tensor>& h_gs, const std::optional<Tensor>& p_d,
                 const std::optional<Tensor>& h_gd, int num_pois);

/// Max-stabilized softmax over the score row.
Tensor predict(const Tensor& z);

/// Binary cross entropy over the softmax probabilities against a one-hot
/// target, entries clamped to [1e-12, 1-1e-12] before the logs (logged
/// when the clamp binds). Excludes the L2 term.
Tensor bce_loss(Tape& tape, const Tensor& y_hat, int target);

/// lambda * sum of squared entries over every parameter tensor.
Tensor l2_penalty(Tape& tape, const ParamTensors& pt, double lambda);

/// bce_loss + l2_penalty, the full training objective for one example.
Tensor loss(Tape& tape, const Tensor& y_hat, int target, const ParamTensors& pt,
            double lambda);

struct UserForwardState {
  Tensor h_ro;
  Tensor attended;  // L x 2d personal trajectory after time attention
  Tensor p_u;
  std::optional<Tensor> p_s, p_d;
  Tensor z;      // 1 x N
  Tensor y_hat;  // 1 x N, sums to 1
  Matrix time_attention, semantic_attention, distance_attention;  // audit copies
};

/// Full forward pass for one history window, reusing previously encoded
/// tensors when the caller shares them across a batch.
UserForwardState forward_from_encodes(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                                      const ModelConfig& config, int user,
                                      std::span<const Visit> history,
                                      const PersonalEncode& personal, const GlobalEncode& global);

UserForwardState forward_example(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                                 const ModelConfig& config, int user,
                                 std::span<const Visit> history);

}  // namespace bayman
