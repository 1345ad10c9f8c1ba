#include "gpsm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gpsm/common.hpp"

namespace gpsm {

ArmIndex::ArmIndex(const Dataset& ds, std::span<const double> gps_w, int w) {
  if (static_cast<int>(gps_w.size()) != ds.n())
    throw ValidationError("score vector length " + std::to_string(gps_w.size()) + " does not match n = " +
                          std::to_string(ds.n()));
  for (int i = 0; i < ds.n(); ++i) {
    if (!std::isfinite(gps_w[i])) throw ValidationError("non-finite score for unit " + std::to_string(i));
    if (ds.w[i] == w) units_.push_back(i);
  }
  if (units_.empty()) throw ValidationError("arm " + std::to_string(w) + " has no units");
  std::stable_sort(units_.begin(), units_.end(), [&](int a, int b) { return gps_w[a] < gps_w[b]; });
  scores_.reserve(units_.size());
  for (int u : units_) scores_.push_back(gps_w[u]);
}

int ArmIndex::nearest(double score) const {
  const int m = size();
  const int pos = static_cast<int>(std::lower_bound(scores_.begin(), scores_.end(), score) - scores_.begin());
  auto dist = [&](int q) { return std::abs(scores_[q] - score); };
  double best = INFINITY;
  if (pos < m) best = dist(pos);
  if (pos > 0) best = std::min(best, dist(pos - 1));
  // Distances are monotone moving away from pos on either side, so every unit
  // at the best distance sits in a contiguous run next to pos.
  int winner = -1;
  for (int q = pos; q < m && dist(q) == best; ++q)
    if (winner < 0 || units_[q] < winner) winner = units_[q];
  for (int q = pos - 1; q >= 0 && dist(q) == best; --q)
    if (winner < 0 || units_[q] < winner) winner = units_[q];
  return winner;
}

std::vector<int> ArmIndex::nearest_k(double score, int L, int skip) const {
  const int m = size();
  const int pos = static_cast<int>(std::lower_bound(scores_.begin(), scores_.end(), score) - scores_.begin());
  auto dist = [&](int q) { return std::abs(scores_[q] - score); };
  struct Cand {
    double d;
    int unit;
  };
  std::vector<Cand> taken;
  int lo = pos - 1, hi = pos;
  auto skip_ahead = [&] {
    while (hi < m && units_[hi] == skip) ++hi;
    while (lo >= 0 && units_[lo] == skip) --lo;
  };
  skip_ahead();
  double threshold = INFINITY;
  while (lo >= 0 || hi < m) {
    const double dl = lo >= 0 ? dist(lo) : INFINITY;
    const double dh = hi < m ? dist(hi) : INFINITY;
    const double next = std::min(dl, dh);
    if (static_cast<int>(taken.size()) >= L && next > threshold) break;
    if (dh <= dl) {
      taken.push_back({dh, units_[hi++]});
    } else {
      taken.push_back({dl, units_[lo--]});
    }
    skip_ahead();
    if (static_cast<int>(taken.size()) == L) threshold = taken.back().d;
  }
  if (static_cast<int>(taken.size()) < L) return {};
  std::sort(taken.begin(), taken.end(), [](const Cand& a, const Cand& b) {
    return a.d < b.d || (a.d == b.d && a.unit < b.unit);
  });
  std::vector<int> out(L);
  for (int k = 0; k < L; ++k) out[k] = taken[k].unit;
  return out;
}

MatchSet match_arm(const Dataset& ds, std::span<const double> gps_w, int w) {
  const ArmIndex index(ds, gps_w, w);
  const int n = ds.n();
  MatchSet ms;
  ms.arm = w;
  ms.match_index.resize(n);
  ms.k_count.assign(n, 0);
  ms.gps_used = Eigen::Map<const Eigen::VectorXd>(gps_w.data(), n);
  for (int i = 0; i < n; ++i) {
    if (ds.w[i] == w) {
      ms.match_index[i] = i;
    } else {
      const int j = index.nearest(gps_w[i]);
      ms.match_index[i] = j;
      ++ms.k_count[j];
    }
  }
  ms.y_imputed.resize(n);
  ms.x_imputed.resize(n, ds.d());
  for (int i = 0; i < n; ++i) {
    ms.y_imputed[i] = ds.y[ms.match_index[i]];
    ms.x_imputed.row(i) = ds.x.row(ms.match_index[i]);
  }
  return ms;
}

Eigen::VectorXd imputed_covariate_mean(const MatchSet& ms) { return ms.x_imputed.colwise().mean().transpose(); }

std::vector<int> nn_in_arm(const Dataset& ds, std::span<const double> gps_w, int w, int i, int L,
                           bool exclude_self) {
  if (L < 1) throw ValidationError("nn_in_arm: L must be at least 1");
  if (i < 0 || i >= ds.n()) throw ValidationError("nn_in_arm: unit index out of range");
  const ArmIndex index(ds, gps_w, w);
  const int available = index.size() - ((exclude_self && ds.w[i] == w) ? 1 : 0);
  if (available < L)
    throw ValidationError("arm " + std::to_string(w) + " has " + std::to_string(available) +
                          " eligible units, fewer than L = " + std::to_string(L));
  return index.nearest_k(gps_w[i], L, exclude_self ? i : -1);
}

}  // namespace gpsm
