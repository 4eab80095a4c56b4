#include "bayman/model.hpp"

#include <cmath>
#include <stdexcept>

#include "bayman/errors.hpp"
#include "bayman/log.hpp"
#include "bayman/rng.hpp"

namespace bayman {

const char* const kAblationVariants[6] = {"full", "noB", "noG", "noGs", "noGd", "noT"};

AblationFlags ablation_from_name(const std::string& name) {
  AblationFlags f;
  if (name == "full") return f;
  if (name == "noB") { f.no_bayes = true; return f; }
  if (name == "noG") { f.no_global = true; return f; }
  if (name == "noGs") { f.no_semantic = true; return f; }
  if (name == "noGd") { f.no_distance = true; return f; }
  if (name == "noT") { f.no_time = true; return f; }
  throw ConfigError("unknown ablation variant: " + name);
}

std::string ablation_name(const AblationFlags& f) {
  std::string out;
  auto tag = [&out](const char* name) {
    if (!out.empty()) out += '+';
    out += name;
  };
  if (f.no_bayes) tag("noB");
  if (f.no_global) tag("noG");
  if (f.no_semantic) tag("noGs");
  if (f.no_distance) tag("noGd");
  if (f.no_time) tag("noT");
  return out.empty() ? "full" : out;
}

void ModelConfig::validate() const {
  if (d < 1) throw ConfigError("model.d must be >= 1");
  if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("model.epsilon must be in [0, 1]");
  if (delta_d_km <= 0.0) throw ConfigError("model.delta_d_km must be positive");
  if (learning_rate <= 0.0) throw ConfigError("model.learning_rate must be positive");
  if (lambda_theta < 0.0) throw ConfigError("model.lambda_theta must be nonnegative");
  if (max_seq_len < 1) throw ConfigError("model.max_seq_len must be >= 1");
  if (epochs < 0) throw ConfigError("model.epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("model.batch_size must be >= 1");
  if (tau_hours <= 0.0) throw ConfigError("model.tau_hours must be positive");
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::entries() {
  return {
      {"embedding", &embedding},
      {"w_u_in", &w_u_in},
      {"w_u_out", &w_u_out},
      {"w_aug_in", &w_aug_in},
      {"w_aug_out", &w_aug_out},
      {"w_s_in", &w_s_in},
      {"w_s_out", &w_s_out},
      {"w_d", &w_d},
      {"gate_u_in", &gate_u_in},
      {"gate_u_out", &gate_u_out},
      {"gate_aug_in", &gate_aug_in},
      {"gate_aug_out", &gate_aug_out},
      {"gate_s_in", &gate_s_in},
      {"gate_s_out", &gate_s_out},
      {"w_q", &w_q},
      {"w_k", &w_k},
      {"w_v", &w_v},
      {"w_qs", &w_qs},
      {"w_ks", &w_ks},
      {"w_vs", &w_vs},
      {"w_qd", &w_qd},
      {"w_kd", &w_kd},
      {"w_vd", &w_vd},
  };
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::entries() const {
  auto mutable_entries = const_cast<ModelParams*>(this)->entries();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_entries.size());
  for (auto& [name, p] : mutable_entries) out.emplace_back(name, p);
  return out;
}

ModelParams ModelParams::init(int num_pois, int d, std::uint64_t seed) {
  ModelParams p;
  p.embedding.resize(num_pois, d);
  for (Matrix* w : {&p.w_u_in, &p.w_u_out, &p.w_aug_in, &p.w_aug_out, &p.w_s_in, &p.w_s_out,
                    &p.w_d, &p.w_ks, &p.w_vs, &p.w_kd, &p.w_vd}) {
    w->resize(d, d);
  }
  for (Matrix* g : {&p.gate_u_in, &p.gate_u_out, &p.gate_aug_in, &p.gate_aug_out, &p.gate_s_in,
                    &p.gate_s_out}) {
    g->resize(1, d);
  }
  for (Matrix* w : {&p.w_q, &p.w_k, &p.w_v}) w->resize(2 * d, 2 * d);
  for (Matrix* w : {&p.w_qs, &p.w_qd}) w->resize(2 * d, d);

  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(seed);
  for (auto& [name, w] : p.entries()) {
    for (Eigen::Index r = 0; r < w->rows(); ++r) {
      for (Eigen::Index c = 0; c < w->cols(); ++c) {
        (*w)(r, c) = rng.uniform(-bound, bound);
      }
    }
  }
  return p;
}

int PersonalBundle::local_at(int poi) const {
  const auto it = local.find(poi);
  if (it == local.end()) {
    throw std::logic_error("personal bundle: poi " + std::to_string(poi) +
                           " missing from the union node set");
  }
  return it->second;
}

namespace {

// Valid only when the graph's nodes are a prefix of the union set.
Matrix extend_adjacency(const Matrix& adj, int union_size) {
  Matrix out = Matrix::Zero(union_size, union_size);
  out.topLeftCorner(adj.rows(), adj.cols()) = adj;
  return out;
}

WeightedDigraph isolated_graph(std::span<const Visit> seq) {
  std::vector<int> nodes;
  std::unordered_map<int, int> seen;
  for (const Visit& v : seq) {
    if (seen.emplace(v.poi, static_cast<int>(nodes.size())).second) nodes.push_back(v.poi);
  }
  return make_graph(std::move(nodes));
}

}  // namespace

RunContext build_run_context(const DatasetSplit& split, const ModelConfig& config,
                             bool include_observed_nodes) {
  const int num_users = split.data.num_users();
  RunContext ctx;
  ctx.num_pois = split.data.num_pois();

  std::vector<std::span<const Visit>> train_views(num_users);
  for (int u = 0; u < num_users; ++u) train_views[u] = split.train(u);

  if (config.ablation.semantic_enabled()) {
    ctx.semantic_graph = build_semantic_graph(train_views, ctx.num_pois);
    ctx.sem_in_hat = normalize_adjacency(ctx.semantic_graph, NormalizeDirection::Ingoing);
    ctx.sem_out_hat = normalize_adjacency(ctx.semantic_graph, NormalizeDirection::Outgoing);
  }
  if (config.ablation.distance_enabled()) {
    ctx.distance_graph = build_distance_graph(split.data.catalog, config.delta_d_km);
    ctx.dist_hat = normalize_adjacency(ctx.distance_graph, NormalizeDirection::Symmetric);
  }

  std::vector<WeightedDigraph> base_graphs(num_users);
  for (int u = 0; u < num_users; ++u) {
    if (train_views[u].size() >= 2) {
      base_graphs[u] = build_personal_graph(train_views[u]);
    } else {
      log_warn("user " + split.data.user_ids[u] +
               ": training prefix too short for a transition graph, using isolated nodes");
      base_graphs[u] = isolated_graph(train_views[u]);
    }
  }

  const std::uint64_t augment_seed = derive_seed(config.seed, "augment");
  ctx.users.resize(static_cast<std::size_t>(num_users));
  for (int u = 0; u < num_users; ++u) {
    PersonalBundle& bundle = ctx.users[static_cast<std::size_t>(u)];
    bundle.base_graph = base_graphs[u];

    if (config.ablation.no_bayes || num_users < 2) {
      bundle.augmented_graph = base_graphs[u];
      bundle.copy_source.assign(train_views[u].size(), std::nullopt);
    } else {
      bundle.match = find_like_minded(u, train_views);
      if (bundle.match) {
        const int q = bundle.match->matched;
        const CopyDistribution posterior =
            copy_posterior(split.data.catalog, train_views[u], train_views[q]);
        AugmentedGraph aug = sample_augmented_graph(
            base_graphs[u], base_graphs[q], train_views[u], train_views[q], posterior,
            config.epsilon, derive_seed(augment_seed, static_cast<std::uint64_t>(u)));
        bundle.augmented_graph = std::move(aug.graph);
        bundle.copy_source = std::move(aug.copy_source);
      } else {
        bundle.augmented_graph = base_graphs[u];
        bundle.copy_source.assign(train_views[u].size(), std::nullopt);
      }
    }

    bundle.nodes = bundle.augmented_graph.nodes;
    bundle.local = bundle.augmented_graph.local;
    if (include_observed_nodes) {
      for (const Visit& v : split.data.sequences[u].visits) {
        if (bundle.local.emplace(v.poi, static_cast<int>(bundle.nodes.size())).second) {
          bundle.nodes.push_back(v.poi);
        }
      }
    }

    const int n = static_cast<int>(bundle.nodes.size());
    bundle.base_in_hat = normalize_adjacency(extend_adjacency(bundle.base_graph.adj, n),
                                             NormalizeDirection::Ingoing);
    bundle.base_out_hat = normalize_adjacency(extend_adjacency(bundle.base_graph.adj, n),
                                              NormalizeDirection::Outgoing);
    bundle.aug_in_hat = normalize_adjacency(extend_adjacency(bundle.augmented_graph.adj, n),
                                            NormalizeDirection::Ingoing);
    bundle.aug_out_hat = normalize_adjacency(extend_adjacency(bundle.augmented_graph.adj, n),
                                             NormalizeDirection::Outgoing);
  }
  return ctx;
}

ParamTensors bind_leaves(const std::vector<Tensor>& leaves) {
  ParamTensors pt;
  Tensor* slots[] = {
      &pt.embedding,
      &pt.w_u_in, &pt.w_u_out, &pt.w_aug_in, &pt.w_aug_out, &pt.w_s_in, &pt.w_s_out, &pt.w_d,
      &pt.gate_u_in, &pt.gate_u_out, &pt.gate_aug_in, &pt.gate_aug_out, &pt.gate_s_in,
      &pt.gate_s_out,
      &pt.w_q, &pt.w_k, &pt.w_v, &pt.w_qs, &pt.w_ks, &pt.w_vs, &pt.w_qd, &pt.w_kd, &pt.w_vd,
  };
  constexpr std::size_t expected = sizeof(slots) / sizeof(slots[0]);
  if (leaves.size() != expected) {
    throw std::invalid_argument("bind_leaves: expected " + std::to_string(expected) +
                                " tensors, got " + std::to_string(leaves.size()));
  }
  for (std::size_t i = 0; i < expected; ++i) {
    *slots[i] = leaves[i];
    pt.all.push_back(leaves[i]);
  }
  return pt;
}

ParamTensors make_leaves(Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<Tensor> leaves;
  for (const auto& [name, w] : params.entries()) {
    leaves.push_back(tape.variable(*w, requires_grad));
  }
  return bind_leaves(leaves);
}

Tensor gcn_layer(const Tensor& a_hat, const Tensor& h, const Tensor& w) {
  return relu(matmul(matmul(a_hat, h), w));
}

PersonalEncode encode_personal(Tape& tape, const ParamTensors& pt, const PersonalBundle& bundle) {
  const Tensor h_nodes = gather_rows(pt.embedding, bundle.nodes);
  const Tensor base_in = tape.constant(bundle.base_in_hat);
  const Tensor base_out = tape.constant(bundle.base_out_hat);
  const Tensor aug_in = tape.constant(bundle.aug_in_hat);
  const Tensor aug_out = tape.constant(bundle.aug_out_hat);

  const Tensor h_base_in = gcn_layer(base_in, h_nodes, pt.w_u_in);
  const Tensor h_base_out = gcn_layer(base_out, h_nodes, pt.w_u_out);
  const Tensor h_aug_in = gcn_layer(aug_in, h_nodes, pt.w_aug_in);
  const Tensor h_aug_out = gcn_layer(aug_out, h_nodes, pt.w_aug_out);

  PersonalEncode enc;
  enc.h_base =
      add(hadamard_rowvec(h_base_in, pt.gate_u_in), hadamard_rowvec(h_base_out, pt.gate_u_out));
  enc.h_aug =
      add(hadamard_rowvec(h_aug_in, pt.gate_aug_in), hadamard_rowvec(h_aug_out, pt.gate_aug_out));
  enc.h_ro = tanh_act(concat_cols(enc.h_base, enc.h_aug));
  return enc;
}

GlobalEncode encode_global(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                           const AblationFlags& flags) {
  GlobalEncode enc;
  if (flags.semantic_enabled()) {
    const Tensor a_in = tape.constant(ctx.sem_in_hat);
    const Tensor a_out = tape.constant(ctx.sem_out_hat);
    const Tensor h_in = gcn_layer(a_in, pt.embedding, pt.w_s_in);
    const Tensor h_out = gcn_layer(a_out, pt.embedding, pt.w_s_out);
    enc.h_gs = add(hadamard_rowvec(h_in, pt.gate_s_in), hadamard_rowvec(h_out, pt.gate_s_out));
  }
  if (flags.distance_enabled()) {
    const Tensor a_d = tape.constant(ctx.dist_hat);
    enc.h_gd = gcn_layer(a_d, pt.embedding, pt.w_d);
  }
  return enc;
}

AttentionOut time_aware_attention(Tape& tape, const ParamTensors& pt, const Tensor& h_seq,
                                  std::span<const std::int64_t> timestamps, double tau_hours,
                                  bool no_time) {
  const Eigen::Index len = h_seq.rows();
  if (len == 0) throw std::invalid_argument("time_aware_attention: empty sequence");
  if (static_cast<Eigen::Index>(timestamps.size()) != len) {
    throw std::invalid_argument("time_aware_attention: timestamp count mismatch");
  }
  const Tensor q = matmul(h_seq, pt.w_q);
  const Tensor k = matmul(h_seq, pt.w_k);
  const Tensor v = matmul(h_seq, pt.w_v);

  Tensor scores = matmul(q, transpose(k));
  if (!no_time) {
    Matrix lag(len, len);
    for (Eigen::Index i = 0; i < len; ++i) {
      for (Eigen::Index j = 0; j < len; ++j) {
        const double hours =
            std::abs(static_cast<double>(timestamps[i] - timestamps[j])) / 3600.0;
        lag(i, j) = -hours / tau_hours;
      }
    }
    scores = add(scores, tape.constant(std::move(lag)));
  }
  scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(pt.w_q.cols())));

  AttentionOut out;
  out.weights = row_softmax(scores);
  out.attended = matmul(out.weights, v);
  out.preference = sum_rows(out.attended);
  return out;
}

AttentionOut preference_refine(Tape&, const Tensor& w_q, const Tensor& w_k, const Tensor& w_v,
                               const Tensor& h_hat, const Tensor& h_view) {
  if (h_hat.rows() != h_view.rows()) {
    throw std::invalid_argument("preference_refine: position count mismatch, " +
                                std::to_string(h_hat.rows()) + " vs " +
                                std::to_string(h_view.rows()));
  }
  const Tensor q = matmul(h_hat, w_q);
  const Tensor k = matmul(h_view, w_k);
  const Tensor v = matmul(h_view, w_v);
  const Tensor scores =
      scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(w_q.cols())));
  AttentionOut out;
  out.weights = row_softmax(scores);
  out.attended = matmul(out.weights, v);
  out.preference = sum_rows(out.attended);
  return out;
}

Tensor score_all(Tape&, const Tensor& p_u, const Tensor& h_ro,
                 const std::vector<int>& union_nodes, const std::optional<Tensor>& p_s,
                 const std::optional<Tensor>& h_gs, const std::optional<Tensor>& p_d,
                 const std::optional<Tensor>& h_gd, int num_pois) {
  Tensor z = scatter_cols(matmul(p_u, transpose(h_ro)), union_nodes, num_pois);
  if (p_s && h_gs) z = add(z, matmul(*p_s, transpose(*h_gs)));
  if (p_d && h_gd) z = add(z, matmul(*p_d, transpose(*h_gd)));
  return z;
}

Tensor predict(const Tensor& z) { return row_softmax(z); }

Tensor bce_loss(Tape& tape, const Tensor& y_hat, int target) {
  const Eigen::Index n = y_hat.cols();
  if (y_hat.rows() != 1) throw std::invalid_argument("bce_loss: y_hat must be a 1xN row");
  if (target < 0 || target >= n) throw std::invalid_argument("bce_loss: target out of range");

  const Matrix& probs = y_hat.value();
  if (probs.minCoeff() < 1e-12 || probs.maxCoeff() > 1.0 - 1e-12) {
    log_debug("bce_loss: probabilities clamped away from {0, 1}");
  }
  Matrix one_hot = Matrix::Zero(1, n);
  one_hot(0, target) = 1.0;
  const Tensor y = tape.constant(std::move(one_hot));
  const Tensor ones = tape.constant(Matrix::Ones(1, n));
  const Tensor yc = clamp(y_hat, 1e-12, 1.0 - 1e-12);
  const Tensor pos = hadamard(y, log_elementwise(yc));
  const Tensor neg = hadamard(subtract(ones, y), log_elementwise(subtract(ones, yc)));
  return scale(sum_all(add(pos, neg)), -1.0);
}

Tensor l2_penalty(Tape& tape, const ParamTensors& pt, double lambda) {
  Tensor acc = tape.scalar(0.0);
  for (const Tensor& p : pt.all) acc = add(acc, sum_all(hadamard(p, p)));
  return scale(acc, lambda);
}

Tensor loss(Tape& tape, const Tensor& y_hat, int target, const ParamTensors& pt, double lambda) {
  return add(bce_loss(tape, y_hat, target), l2_penalty(tape, pt, lambda));
}

UserForwardState forward_from_encodes(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                                      const ModelConfig& config, int user,
                                      std::span<const Visit> history,
                                      const PersonalEncode& personal,
                                      const GlobalEncode& global) {
  if (history.empty()) throw std::invalid_argument("forward: empty history window");
  if (static_cast<int>(history.size()) > config.max_seq_len) {
    throw std::invalid_argument("forward: history longer than max_seq_len");
  }
  const PersonalBundle& bundle = ctx.users.at(static_cast<std::size_t>(user));

  std::vector<int> local_idx, global_idx;
  std::vector<std::int64_t> timestamps;
  local_idx.reserve(history.size());
  global_idx.reserve(history.size());
  timestamps.reserve(history.size());
  for (const Visit& v : history) {
    local_idx.push_back(bundle.local_at(v.poi));
    global_idx.push_back(v.poi);
    timestamps.push_back(v.timestamp);
  }

  UserForwardState state;
  state.h_ro = personal.h_ro;

  const Tensor h_seq = gather_rows(personal.h_ro, local_idx);
  const AttentionOut time_att = time_aware_attention(tape, pt, h_seq, timestamps,
                                                     config.tau_hours, config.ablation.no_time);
  state.attended = time_att.attended;
  state.p_u = time_att.preference;
  state.time_attention = time_att.weights.value();

  if (global.h_gs) {
    const Tensor h_view = gather_rows(*global.h_gs, global_idx);
    const AttentionOut sem =
        preference_refine(tape, pt.w_qs, pt.w_ks, pt.w_vs, state.attended, h_view);
    state.p_s = sem.preference;
    state.semantic_attention = sem.weights.value();
  }
  if (global.h_gd) {
    const Tensor h_view = gather_rows(*global.h_gd, global_idx);
    const AttentionOut dist =
        preference_refine(tape, pt.w_qd, pt.w_kd, pt.w_vd, state.attended, h_view);
    state.p_d = dist.preference;
    state.distance_attention = dist.weights.value();
  }

  state.z = score_all(tape, state.p_u, personal.h_ro, bundle.nodes, state.p_s, global.h_gs,
                      state.p_d, global.h_gd, ctx.num_pois);
  state.y_hat = predict(state.z);
  return state;
}

UserForwardState forward_example(Tape& tape, const ParamTensors& pt, const RunContext& ctx,
                                 const ModelConfig& config, int user,
                                 std::span<const Visit> history) {
  const PersonalBundle& bundle = ctx.users.at(static_cast<std::size_t>(user));
  const PersonalEncode personal = encode_personal(tape, pt, bundle);
  const GlobalEncode global = encode_global(tape, pt, ctx, config.ablation);
  return forward_from_encodes(tape, pt, ctx, config, user, history, personal, global);
}

}  // namespace bayman
