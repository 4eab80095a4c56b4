#pragma once

#include <vector>

#include "bayman/checkin_data.hpp"
#include "bayman/linalg.hpp"

namespace bayman {

/// Ranks POIs by training check-in count, ties toward the smaller index.
class PopularityRanker {
 public:
  static PopularityRanker fit(const DatasetSplit& split);
  const std::vector<int>& rank() const { return order_; }

 private:
  std::vector<int> order_;
};

/// First-order transition ranker: orders POIs by the pooled transition
/// probability row of the current POI, backing off to popularity when the
/// row is empty.
class MarkovRanker {
 public:
  static MarkovRanker fit(const DatasetSplit& split);
  std::vector<int> rank(int last_poi) const;

 private:
  Matrix transitions_;  // N x N pooled transition probabilities
  PopularityRanker fallback_;
};

}  // namespace bayman
