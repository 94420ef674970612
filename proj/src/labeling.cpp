#include "demandmap/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "demandmap/csv.hpp"
#include "demandmap/rng.hpp"

namespace demandmap::labeling {

std::pair<double, double> BinEdges::bin_span(int bin) const {
  switch (bin) {
    case 0: return {vmin, e1};
    case 1: return {e1, e2};
    case 2: return {e2, e3};
    case 3: return {e3, vmax};
    default: throw ArgumentError(strf("bin index %d out of range", bin));
  }
}

BinEdges quantile_edges(std::vector<double> values, const std::string& metric, int k) {
  if (k != 4) throw ArgumentError("quantile_edges: only k = 4 is supported");
  std::set<double> distinct(values.begin(), values.end());
  if (static_cast<int>(distinct.size()) < k) {
    throw DomainError(strf("quantile_edges: metric \"%s\" has %zu distinct values, need %d",
                           metric.c_str(), distinct.size(), k));
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    double h = (static_cast<double>(values.size()) - 1.0) * q;
    size_t lo = static_cast<size_t>(std::floor(h));
    double frac = h - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
  };
  BinEdges e;
  e.metric = metric;
  e.e1 = quantile(0.25);
  e.e2 = quantile(0.50);
  e.e3 = quantile(0.75);
  e.vmin = values.front();
  e.vmax = values.back();
  return e;
}

BinAssignment assign_bin(double value, const BinEdges& edges) {
  BinAssignment a;
  a.value = value;
  if (value < edges.e1) a.bin = 0;
  else if (value < edges.e2) a.bin = 1;
  else if (value < edges.e3) a.bin = 2;
  else a.bin = 3;

  // Out-of-range values clamp with no closeness flag.
  if (value < edges.vmin || value > edges.vmax) return a;

  auto [lo, hi] = edges.bin_span(a.bin);
  double span = hi - lo;
  if (span <= 0.0) return a;
  if (a.bin < 3 && value > hi - 0.1 * span) {
    a.closeness = Closeness::upper;
  } else if (a.bin > 0 && value < lo + 0.1 * span) {
    a.closeness = Closeness::lower;
  }
  return a;
}

Split make_split(const std::vector<ClusterInfo>& clusters, SplitKind kind,
                 double holdout_fraction, uint64_t seed, const std::string& holdout_country) {
  Split split;
  split.kind = kind;
  split.seed = seed;
  if (kind == SplitKind::random30) {
    if (clusters.size() < 10) {
      throw DataError(strf("make_split: need >= 10 clusters for a random split, got %zu",
                           clusters.size()));
    }
    std::vector<std::string> ids;
    ids.reserve(clusters.size());
    for (const auto& c : clusters) ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed, "split.random30"));
    rng.shuffle(ids);
    size_t n_val = static_cast<size_t>(
        std::llround(holdout_fraction * static_cast<double>(ids.size())));
    if (n_val == 0 || n_val >= ids.size()) {
      throw DataError(strf("make_split: holdout fraction %.3f leaves an empty side",
                           holdout_fraction));
    }
    split.validation.assign(ids.begin(), ids.begin() + static_cast<long>(n_val));
    split.train.assign(ids.begin() + static_cast<long>(n_val), ids.end());
  } else {
    for (const auto& c : clusters) {
      if (c.country == holdout_country) split.validation.push_back(c.id);
      else split.train.push_back(c.id);
    }
    if (split.validation.empty() || split.train.empty()) {
      throw DataError("make_split: country holdout \"" + holdout_country +
                      "\" leaves an empty side");
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

uint64_t FoldPlan::checksum() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t f = 0; f < folds.size(); ++f) {
    for (const auto& id : folds[f]) {
      h = fnv1a64(id, h);
      h = fnv1a64(strf(":%zu;", f), h);
    }
  }
  return h;
}

namespace {

struct XY {
  double x, y;
};

double sqdist(const XY& a, const XY& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Seeded k-means++ with Lloyd iterations; returns assignments and inertia.
double kmeans(const std::vector<XY>& pts, int k, uint64_t seed, std::vector<int>& assign,
              std::vector<XY>& centers) {
  Rng rng(seed);
  size_t n = pts.size();
  centers.clear();
  centers.push_back(pts[rng.next_below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : centers) best = std::min(best, sqdist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      centers.push_back(pts[rng.next_below(n)]);
      continue;
    }
    double target = rng.next_double() * total;
    size_t pick = 0;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centers.push_back(pts[pick]);
  }
  assign.assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::max();
      for (int c = 0; c < k; ++c) {
        double d = sqdist(pts[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<XY> sums(k, {0, 0});
    std::vector<int> counts(k, 0);
    for (size_t i = 0; i < n; ++i) {
      sums[assign[i]].x += pts[i].x;
      sums[assign[i]].y += pts[i].y;
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = {sums[c].x / counts[c], sums[c].y / counts[c]};
    }
    if (!changed) break;
  }
  double inertia = 0.0;
  for (size_t i = 0; i < n; ++i) inertia += sqdist(pts[i], centers[assign[i]]);
  return inertia;
}

}  // namespace

FoldPlan make_fold_plan(const std::vector<ClusterInfo>& train_clusters, FoldMode mode, int k,
                        uint64_t seed) {
  size_t n = train_clusters.size();
  if (static_cast<int>(n) < k) {
    throw DataError(strf("make_fold_plan: %zu clusters cannot fill %d folds", n, k));
  }
  FoldPlan plan;
  plan.mode = mode;
  plan.seed = seed;
  plan.folds.assign(static_cast<size_t>(k), {});

  std::vector<ClusterInfo> sorted = train_clusters;
  std::sort(sorted.begin(), sorted.end(),
            [](const ClusterInfo& a, const ClusterInfo& b) { return a.id < b.id; });

  if (mode == FoldMode::random) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(seed, "folds.random"));
    rng.shuffle(order);
    for (size_t i = 0; i < n; ++i) {
      plan.folds[i % static_cast<size_t>(k)].push_back(sorted[order[i]].id);
    }
  } else {
    double mean_lat = 0.0;
    for (const auto& c : sorted) mean_lat += c.lat;
    mean_lat /= static_cast<double>(n);
    double lon_scale = std::cos(mean_lat * 3.14159265358979323846 / 180.0);
    std::vector<XY> pts(n);
    for (size_t i = 0; i < n; ++i) pts[i] = {sorted[i].lat, sorted[i].lon * lon_scale};

    std::vector<int> best_assign;
    std::vector<XY> best_centers;
    double best_inertia = std::numeric_limits<double>::max();
    for (int restart = 0; restart < 8; ++restart) {
      std::vector<int> assign;
      std::vector<XY> centers;
      double inertia =
          kmeans(pts, k, mix_seed(seed, "folds.kmeans", static_cast<uint64_t>(restart)), assign,
                 centers);
      if (inertia < best_inertia) {
        best_inertia = inertia;
        best_assign = assign;
        best_centers = centers;
      }
    }

    // Balance to sizes differing by at most one: repeatedly take the largest
    // fold and hand its member nearest to a strictly-smaller fold's centroid
    // to that fold. Each move shrinks the donor, so the loop terminates.
    std::vector<std::vector<size_t>> members(static_cast<size_t>(k));
    for (size_t i = 0; i < n; ++i) members[static_cast<size_t>(best_assign[i])].push_back(i);
    for (;;) {
      size_t donor = 0, max_sz = 0, min_sz = n;
      for (size_t c = 0; c < members.size(); ++c) {
        if (members[c].size() > max_sz) {
          max_sz = members[c].size();
          donor = c;
        }
        min_sz = std::min(min_sz, members[c].size());
      }
      if (max_sz - min_sz <= 1) break;
      double best_d = std::numeric_limits<double>::max();
      size_t best_member = 0, best_fold = 0;
      bool found = false;
      for (size_t c = 0; c < members.size(); ++c) {
        if (c == donor || members[c].size() + 1 >= max_sz) continue;
        for (size_t p : members[donor]) {
          double d = sqdist(pts[p], best_centers[c]);
          if (!found || d < best_d ||
              (d == best_d && sorted[p].id < sorted[best_member].id)) {
            best_d = d;
            best_member = p;
            best_fold = c;
            found = true;
          }
        }
      }
      if (!found) break;
      auto& dm = members[donor];
      dm.erase(std::find(dm.begin(), dm.end(), best_member));
      members[best_fold].push_back(best_member);
    }
    for (int c = 0; c < k; ++c) {
      for (size_t p : members[c]) plan.folds[c].push_back(sorted[p].id);
    }
  }

  for (auto& fold : plan.folds) {
    if (fold.empty()) throw DataError("make_fold_plan: produced an empty fold");
    std::sort(fold.begin(), fold.end());
  }
  return plan;
}

void write_split_csv(const std::string& path, const Split& split, const FoldPlan* plan) {
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, int> fold_of;
  if (plan) {
    for (size_t f = 0; f < plan->folds.size(); ++f) {
      for (const auto& id : plan->folds[f]) fold_of[id] = static_cast<int>(f);
    }
  }
  for (const auto& id : split.train) {
    auto it = fold_of.find(id);
    rows.push_back({id, "train", it == fold_of.end() ? "" : strf("%d", it->second)});
  }
  for (const auto& id : split.validation) rows.push_back({id, "validation", ""});
  std::vector<std::string> comments = {strf("seed=%llu", static_cast<unsigned long long>(split.seed))};
  write_csv(path, {"cluster_id", "role", "fold"}, rows, comments);
}

std::pair<Split, FoldPlan> read_split_csv(const std::string& path) {
  CsvTable t = read_csv(path, /*allow_comments=*/true);
  Split split;
  FoldPlan plan;
  for (const auto& c : t.leading_comments) {
    auto eq = c.find("seed=");
    if (eq != std::string::npos) {
      int64_t s = 0;
      if (parse_int(c.substr(eq + 5), s)) {
        split.seed = static_cast<uint64_t>(s);
        plan.seed = split.seed;
      }
    }
  }
  int id_col = t.column("cluster_id"), role_col = t.column("role"), fold_col = t.column("fold");
  if (id_col < 0 || role_col < 0 || fold_col < 0) {
    throw SchemaError(path + ": expected columns cluster_id, role, fold");
  }
  int max_fold = -1;
  std::vector<std::pair<std::string, int>> train_folds;
  for (const auto& row : t.rows) {
    const std::string& id = row[static_cast<size_t>(id_col)];
    const std::string& role = row[static_cast<size_t>(role_col)];
    const std::string& fold = row[static_cast<size_t>(fold_col)];
    if (role == "train") {
      split.train.push_back(id);
      int f = -1;
      if (!fold.empty()) {
        int64_t v;
        if (parse_int(fold, v)) f = static_cast<int>(v);
      }
      train_folds.emplace_back(id, f);
      max_fold = std::max(max_fold, f);
    } else if (role == "validation") {
      split.validation.push_back(id);
    } else {
      throw SchemaError(path + ": unknown role \"" + role + "\"");
    }
  }
  if (max_fold >= 0) {
    plan.folds.assign(static_cast<size_t>(max_fold + 1), {});
    for (const auto& [id, f] : train_folds) {
      if (f >= 0) plan.folds[static_cast<size_t>(f)].push_back(id);
    }
  }
  return {split, plan};
}

}  // namespace demandmap::labeling
