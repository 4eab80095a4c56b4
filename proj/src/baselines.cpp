#include "bayman/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "bayman/poi_graphs.hpp"

namespace bayman {

PopularityRanker PopularityRanker::fit(const DatasetSplit& split) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(split.data.num_pois()), 0);
  for (int u = 0; u < split.data.num_users(); ++u) {
    for (const Visit& v : split.train(u)) counts[static_cast<std::size_t>(v.poi)] += 1;
  }
  PopularityRanker ranker;
  ranker.order_.resize(counts.size());
  std::iota(ranker.order_.begin(), ranker.order_.end(), 0);
  std::sort(ranker.order_.begin(), ranker.order_.end(), [&counts](int a, int b) {
    const auto ca = counts[static_cast<std::size_t>(a)], cb = counts[static_cast<std::size_t>(b)];
    if (ca != cb) return ca > cb;
    return a < b;
  });
  return ranker;
}

MarkovRanker MarkovRanker::fit(const DatasetSplit& split) {
  std::vector<std::span<const Visit>> train_views;
  train_views.reserve(static_cast<std::size_t>(split.data.num_users()));
  for (int u = 0; u < split.data.num_users(); ++u) train_views.push_back(split.train(u));

  MarkovRanker ranker;
  ranker.transitions_ = build_semantic_graph(train_views, split.data.num_pois()).adj;
  ranker.fallback_ = PopularityRanker::fit(split);
  return ranker;
}

std::vector<int> MarkovRanker::rank(int last_poi) const {
  const auto row = transitions_.row(last_poi);
  if (row.sum() == 0.0) return fallback_.rank();
  std::vector<int> order(static_cast<std::size_t>(transitions_.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&row](int a, int b) {
    if (row(a) != row(b)) return row(a) > row(b);
    return a < b;
  });
  return order;
}

}  // namespace bayman
