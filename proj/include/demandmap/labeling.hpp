#ifndef DEMANDMAP_LABELING_HPP_
#define DEMANDMAP_LABELING_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "demandmap/common.hpp"

namespace demandmap::labeling {

// Interior quartile edges fit on training values only.
struct BinEdges {
  std::string metric;
  double e1 = 0.0, e2 = 0.0, e3 = 0.0;
  double vmin = 0.0, vmax = 0.0;

  std::vector<double> edges() const { return {e1, e2, e3}; }
  // Value span [lo, hi) of one bin; bin 3's top is closed at vmax.
  std::pair<double, double> bin_span(int bin) const;
};

enum class Closeness { none, lower, upper };

struct BinAssignment {
  std::string owner;
  int bin = 0;
  Closeness closeness = Closeness::none;
  double value = 0.0;

  // Adjacent bin for the blended loss; equals bin when closeness is none.
  int neighbor() const {
    if (closeness == Closeness::upper) return bin + 1;
    if (closeness == Closeness::lower) return bin - 1;
    return bin;
  }
};

// Empirical quartiles by linear interpolation of order statistics
// (h = (n-1)q). Requires at least k distinct values.
BinEdges quantile_edges(std::vector<double> values, const std::string& metric = "", int k = 4);

// Half-open bins [lo,e1), [e1,e2), [e2,e3), [e3,hi]; values outside the
// training range clamp to the outer bins. A value in the top 10% of its
// bin's span is close to the bin above, in the bottom 10% close to the bin
// below; both flags are suppressed where no such bin exists.
BinAssignment assign_bin(double value, const BinEdges& edges);

struct ClusterInfo {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::string country;
};

enum class SplitKind { random30, country_holdout };

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  SplitKind kind = SplitKind::random30;
  uint64_t seed = 0;
};

Split make_split(const std::vector<ClusterInfo>& clusters, SplitKind kind,
                 double holdout_fraction, uint64_t seed, const std::string& holdout_country = "");

enum class FoldMode { random, spatial };

struct FoldPlan {
  FoldMode mode = FoldMode::random;
  std::vector<std::vector<std::string>> folds;  // disjoint, cover the training set
  uint64_t seed = 0;

  int k() const { return static_cast<int>(folds.size()); }
  uint64_t checksum() const;
};

// Random mode: a uniform seeded partition with sizes differing by <= 1.
// Spatial mode: seeded k-means on (lat, lon*cos(mean lat)) followed by a
// size-balancing pass that moves members of over-full folds to the nearest
// under-full fold's centroid.
FoldPlan make_fold_plan(const std::vector<ClusterInfo>& train_clusters, FoldMode mode, int k,
                        uint64_t seed);

// Combined split+fold serialization: columns cluster_id, role, fold with the
// seed in a leading comment line.
void write_split_csv(const std::string& path, const Split& split, const FoldPlan* plan = nullptr);
std::pair<Split, FoldPlan> read_split_csv(const std::string& path);

}  // namespace demandmap::labeling

#endif  // DEMANDMAP_LABELING_HPP_
