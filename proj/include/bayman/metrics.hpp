#pragma once

#include <span>
#include <vector>

#include "bayman/linalg.hpp"

namespace bayman {

/// Full ranking of POIs from a 1xN probability (or score) row: descending
/// value, ties broken by the smaller POI index.
std::vector<int> rank_pois(const Matrix& scores_row);

/// 1 when the target appears in the first k entries. `ranked` must hold at
/// least k distinct entries (duplicates are an error).
int recall_at_k(std::span<const int> ranked, int target, int k);

/// 1/log2(rank + 1) for rank <= k (ranks counted from 1), else 0.
double ndcg_at_k(std::span<const int> ranked, int target, int k);

/// Running means over test cases for a fixed list of cutoffs.
class MetricsAccumulator {
 public:
  explicit MetricsAccumulator(std::vector<int> k_list);

  void add(std::span<const int> ranked, int target);

  const std::vector<int>& k_list() const { return k_list_; }
  std::size_t count() const { return count_; }
  std::vector<double> recall() const;  // aligned with k_list
  std::vector<double> ndcg() const;

 private:
  std::vector<int> k_list_;
  std::vector<double> recall_sum_;
  std::vector<double> ndcg_sum_;
  std::size_t count_ = 0;
};

}  // namespace bayman
