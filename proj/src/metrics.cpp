#include "bayman/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace bayman {
namespace {

/// 1-based rank of the target, or 0 when absent.
int rank_of(std::span<const int> ranked, int target) {
  std::unordered_set<int> seen;
  seen.reserve(ranked.size());
  int rank = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!seen.insert(ranked[i]).second) {
      throw std::invalid_argument("ranking contains duplicate poi " + std::to_string(ranked[i]));
    }
    if (ranked[i] == target && rank == 0) rank = static_cast<int>(i) + 1;
  }
  return rank;
}

void check_k(std::span<const int> ranked, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (ranked.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("ranking shorter than k");
  }
}

}  // namespace

std::vector<int> rank_pois(const Matrix& scores_row) {
  if (scores_row.rows() != 1) throw std::invalid_argument("rank_pois: expected a 1xN row");
  std::vector<int> order(static_cast<std::size_t>(scores_row.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores_row](int a, int b) {
    const double sa = scores_row(0, a), sb = scores_row(0, b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return order;
}

int recall_at_k(std::span<const int> ranked, int target, int k) {
  check_k(ranked, k);
  const int rank = rank_of(ranked, target);
  return (rank >= 1 && rank <= k) ? 1 : 0;
}

double ndcg_at_k(std::span<const int> ranked, int target, int k) {
  check_k(ranked, k);
  const int rank = rank_of(ranked, target);
  if (rank < 1 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

MetricsAccumulator::MetricsAccumulator(std::vector<int> k_list) : k_list_(std::move(k_list)) {
  if (k_list_.empty()) throw std::invalid_argument("MetricsAccumulator: empty k list");
  recall_sum_.assign(k_list_.size(), 0.0);
  ndcg_sum_.assign(k_list_.size(), 0.0);
}

void MetricsAccumulator::add(std::span<const int> ranked, int target) {
  for (std::size_t i = 0; i < k_list_.size(); ++i) {
    recall_sum_[i] += recall_at_k(ranked, target, k_list_[i]);
    ndcg_sum_[i] += ndcg_at_k(ranked, target, k_list_[i]);
  }
  ++count_;
}

std::vector<double> MetricsAccumulator::recall() const {
  std::vector<double> out(k_list_.size(), 0.0);
  for (std::size_t i = 0; i < k_list_.size(); ++i) {
    out[i] = count_ == 0 ? 0.0 : recall_sum_[i] / static_cast<double>(count_);
  }
  return out;
}

std::vector<double> MetricsAccumulator::ndcg() const {
  std::vector<double> out(k_list_.size(), 0.0);
  for (std::size_t i = 0; i < k_list_.size(); ++i) {
    out[i] = count_ == 0 ? 0.0 : ndcg_sum_[i] / static_cast<double>(count_);
  }
  return out;
}

}  // namespace bayman
