#pragma once

#include "sre/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sre {

/// Binary symmetric neighbourhood structure over n areal units.
///
/// Stored in compressed adjacency form. Immutable once built, so a single
/// instance can be shared by any number of chains.
class AreaGraph {
 public:
  AreaGraph() = default;

  // Symmetric closure of `pairs`; duplicates collapse. Throws InputError on
  // out-of-range indices or self-loops.
  AreaGraph(Index n, std::span<const std::pair<Index, Index>> pairs);

  Index size() const { return n_; }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index degree(Index k) const { return offsets_[k + 1] - offsets_[k]; }
  Vec degrees() const;

  std::span<const Index> neighbours(Index k) const {
    return {neighbours_.data() + offsets_[k], static_cast<std::size_t>(degree(k))};
  }

  // Each undirected edge once, as (k, i) with k < i.
  const std::vector<std::pair<Index, Index>>& edges() const { return edges_; }

  bool adjacent(Index k, Index i) const;

  Mat adjacency() const;
  Mat laplacian() const;  // D - W

  // Sum over neighbours i of values(i).
  double neighbour_sum(Index k, const Vec& values) const {
    double s = 0.0;
    for (Index i : neighbours(k)) s += values(i);
    return s;
  }

 private:
  Index n_ = 0;
  std::vector<Index> offsets_{0};
  std::vector<Index> neighbours_;
  std::vector<std::pair<Index, Index>> edges_;
};

AreaGraph from_adjacency_list(Index n, std::span<const std::pair<Index, Index>> pairs);

// Resolves string ids against `area_ids` (position = index).
AreaGraph from_adjacency_list(const std::vector<std::string>& area_ids,
                              const std::vector<std::pair<std::string, std::string>>& pairs);

struct MoranResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

double morans_i_statistic(const AreaGraph& graph, const Vec& residuals);

/// Global Moran's I with a one-sided permutation p-value
/// (1 + #{I_perm >= I}) / (n_permutations + 1).
MoranResult morans_i(const AreaGraph& graph, const Vec& residuals, int n_permutations = 9999,
                     std::uint64_t seed = 1);

}  // namespace sre
