#ifndef TUMORSCOPE_FCM_HPP
#define TUMORSCOPE_FCM_HPP

// Fuzzy C-Means on scalar intensities, hard-label extraction and a Lloyd
// K-Means baseline. All routines are deterministic for a given seed: the
// PRNG is std::mt19937_64 (sequence fixed by the standard) and its output is
// mapped to reals and ranges here rather than through <random>
// distributions, whose algorithms vary between standard libraries.

#include <tumorscope/error.hpp>
#include <tumorscope/mask.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tumorscope {

struct FcmParams {
  int c = 5;
  double m = 2.0;
  double epsilon = 1e-5;
  int max_iter = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (c < 2) throw Error(Errc::BadParams, "cluster count c must be >= 2");
    if (!std::isfinite(m) || m <= 1.0) throw Error(Errc::BadParams, "fuzziness m must be > 1");
    if (!std::isfinite(epsilon) || epsilon <= 0.0) throw Error(Errc::BadParams, "epsilon must be > 0");
    if (max_iter < 1) throw Error(Errc::BadParams, "max_iter must be >= 1");
  }

  friend bool operator==(const FcmParams&, const FcmParams&) = default;
};

/// n x c row-stochastic matrix; entry (i, j) is the membership of point i in
/// cluster j.
template <std::floating_point Real = double>
class MembershipMatrix {
 public:
  MembershipMatrix() = default;
  MembershipMatrix(std::size_t n, std::size_t c) : n_(n), c_(c), w_(n * c, Real{0}) {}

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return c_; }

  Real& operator()(std::size_t i, std::size_t j) { return w_[i * c_ + j]; }
  Real operator()(std::size_t i, std::size_t j) const { return w_[i * c_ + j]; }

  std::span<Real> row(std::size_t i) { return {w_.data() + i * c_, c_}; }
  std::span<const Real> row(std::size_t i) const { return {w_.data() + i * c_, c_}; }

  std::span<const Real> values() const noexcept { return w_; }

  /// Largest |1 - row sum| over all rows.
  Real max_row_sum_error() const {
    Real worst = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      Real sum = 0;
      for (Real v : row(i)) sum += v;
      worst = std::max(worst, std::abs(sum - Real{1}));
    }
    return worst;
  }

  friend bool operator==(const MembershipMatrix&, const MembershipMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t c_ = 0;
  std::vector<Real> w_;
};

template <std::floating_point Real = double>
struct ClusterModel {
  std::vector<Real> centroids;
  MembershipMatrix<Real> membership;
  int iterations = 0;
  std::vector<Real> objective_trace;
  bool converged = false;

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// State handed to an fcm observer after each round.
template <std::floating_point Real>
struct FcmRound {
  int iteration;
  std::span<const Real> centroids;
  const MembershipMatrix<Real>& membership;
  Real objective;
  Real max_change;
};

struct LabelMap {
  std::vector<int> labels;
  int c = 0;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

namespace detail {

// Uniform double in the open interval (0, 1).
inline double uniform_open01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Unbiased integer in [0, bound).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

template <std::floating_point Real>
void require_finite(std::span<const Real> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) throw Error(Errc::NonFiniteInput, "data point " + std::to_string(i));
  }
}

template <std::floating_point Real>
void require_shape(std::span<const Real> data, const MembershipMatrix<Real>& w) {
  if (w.rows() != data.size()) {
    throw Error(Errc::DimMismatch, "membership has " + std::to_string(w.rows()) + " rows for " +
                                       std::to_string(data.size()) + " points");
  }
}

inline bool is_two(double m) { return m == 2.0; }

// w^m with the common m = 2 case kept to a single multiply.
template <std::floating_point Real>
Real fuzzify(Real w, double m) {
  return is_two(m) ? w * w : static_cast<Real>(std::pow(w, m));
}

// Weighted means per column. Returns the index of the first column whose
// weight sum is zero, or cols() when every column is usable; such columns are
// left untouched in `out`.
template <std::floating_point Real>
std::size_t weighted_centroids(std::span<const Real> data, const MembershipMatrix<Real>& w, double m,
                               std::span<Real> out) {
  const std::size_t n = w.rows();
  const std::size_t c = w.cols();
  std::vector<Real> num(c, Real{0});
  std::vector<Real> den(c, Real{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const Real wm = fuzzify(w(i, j), m);
      num[j] += wm * data[i];
      den[j] += wm;
    }
  }
  std::size_t first_empty = c;
  for (std::size_t j = 0; j < c; ++j) {
    if (den[j] > Real{0}) {
      out[j] = num[j] / den[j];
    } else {
      if (first_empty == c) first_empty = j;
    }
  }
  return first_empty;
}

template <std::floating_point Real>
void membership_row(Real x, std::span<const Real> centroids, double m, std::span<Real> row) {
  const std::size_t c = centroids.size();
  for (std::size_t j = 0; j < c; ++j) {
    if ((x - centroids[j]) * (x - centroids[j]) == Real{0}) {
      std::fill(row.begin(), row.end(), Real{0});
      row[j] = Real{1};
      return;
    }
  }
  // Distances enter squared, so the exponent 2/(m-1) becomes 1/(m-1).
  const double power = 1.0 / (m - 1.0);
  for (std::size_t j = 0; j < c; ++j) {
    const Real dj = (x - centroids[j]) * (x - centroids[j]);
    Real sum = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const Real dk = (x - centroids[k]) * (x - centroids[k]);
      const Real ratio = dj / dk;
      sum += is_two(m) ? ratio : static_cast<Real>(std::pow(ratio, power));
    }
    row[j] = Real{1} / sum;
  }
}

}  // namespace detail

/// Random row-stochastic start: each row is a normalized vector of
/// independent Exp(1) draws, i.e. uniform on the probability simplex.
template <std::floating_point Real = double>
MembershipMatrix<Real> init_membership(std::size_t n, std::size_t c, std::uint64_t seed) {
  if (c == 0) throw Error(Errc::BadParams, "cluster count must be positive");
  if (n < c) {
    throw Error(Errc::TooFewPoints, std::to_string(n) + " points for " + std::to_string(c) + " clusters");
  }
  std::mt19937_64 rng(seed);
  MembershipMatrix<Real> w(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = w.row(i);
    Real sum = 0;
    for (auto& v : row) {
      v = static_cast<Real>(-std::log(detail::uniform_open01(rng)));
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return w;
}

/// C_k = sum_x w_k(x)^m x / sum_x w_k(x)^m for every column k.
template <std::floating_point Real>
std::vector<Real> update_centroids(std::span<const Real> data, const MembershipMatrix<Real>& w, double m) {
  detail::require_shape(data, w);
  std::vector<Real> centroids(w.cols(), Real{0});
  const std::size_t empty = detail::weighted_centroids(data, w, m, std::span<Real>(centroids));
  if (empty != w.cols()) {
    throw Error(Errc::EmptyCluster, "cluster " + std::to_string(empty) + " has zero total weight");
  }
  return centroids;
}

/// w_ij = 1 / sum_k (|x_i - c_j| / |x_i - c_k|)^(2/(m-1)). A point lying
/// exactly on a centroid belongs wholly to the lowest such centroid.
template <std::floating_point Real>
MembershipMatrix<Real> update_membership(std::span<const Real> data, std::span<const Real> centroids, double m) {
  MembershipMatrix<Real> w(data.size(), centroids.size());
  for (std::size_t i = 0; i < data.size(); ++i) detail::membership_row(data[i], centroids, m, w.row(i));
  return w;
}

/// sum_i sum_j w_ij^m (x_i - c_j)^2
template <std::floating_point Real>
Real objective(std::span<const Real> data, std::span<const Real> centroids, const MembershipMatrix<Real>& w,
               double m) {
  detail::require_shape(data, w);
  Real total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < centroids.size(); ++j) {
      const Real d = data[i] - centroids[j];
      total += detail::fuzzify(w(i, j), m) * d * d;
    }
  }
  return total;
}

/// Alternates centroid and membership updates from `initial` until the
/// largest elementwise membership change is <= epsilon or max_iter rounds.
/// A cluster whose weights all vanish keeps its previous centroid (its
/// contribution to the objective is zero either way). `on_round` sees the
/// state after every round.
template <std::floating_point Real, std::invocable<const FcmRound<Real>&> Observer>
ClusterModel<Real> fcm(std::span<const Real> data, const FcmParams& p, MembershipMatrix<Real> initial,
                       Observer&& on_round) {
  p.validate();
  detail::require_finite(data);
  const auto c = static_cast<std::size_t>(p.c);
  if (data.size() < c) {
    throw Error(Errc::TooFewPoints, std::to_string(data.size()) + " points for " + std::to_string(c) + " clusters");
  }
  if (initial.rows() != data.size() || initial.cols() != c) {
    throw Error(Errc::DimMismatch, "initial membership shape does not match data and c");
  }

  const auto [lo_it, hi_it] = std::minmax_element(data.begin(), data.end());
  const Real lo = *lo_it;
  const Real hi = *hi_it;
  Real mean = 0;
  for (Real x : data) mean += x;
  mean /= static_cast<Real>(data.size());

  ClusterModel<Real> model;
  model.centroids.assign(c, std::clamp(mean, lo, hi));
  model.membership = std::move(initial);

  for (int it = 1; it <= p.max_iter; ++it) {
    detail::weighted_centroids(data, model.membership, p.m, std::span<Real>(model.centroids));
    for (auto& v : model.centroids) v = std::clamp(v, lo, hi);

    auto next = update_membership(data, std::span<const Real>(model.centroids), p.m);
    Real change = 0;
    const auto prev = model.membership.values();
    const auto cur = next.values();
    for (std::size_t k = 0; k < cur.size(); ++k) change = std::max(change, std::abs(cur[k] - prev[k]));

    model.membership = std::move(next);
    model.iterations = it;
    model.objective_trace.push_back(objective(data, std::span<const Real>(model.centroids), model.membership, p.m));
    on_round(FcmRound<Real>{it, model.centroids, model.membership, model.objective_trace.back(), change});
    if (change <= static_cast<Real>(p.epsilon)) {
      model.converged = true;
      break;
    }
  }
  return model;
}

template <std::floating_point Real>
ClusterModel<Real> fcm(std::span<const Real> data, const FcmParams& p, MembershipMatrix<Real> initial) {
  return fcm(data, p, std::move(initial), [](const FcmRound<Real>&) {});
}

template <std::floating_point Real, std::invocable<const FcmRound<Real>&> Observer>
ClusterModel<Real> fcm(std::span<const Real> data, const FcmParams& p, Observer&& on_round) {
  p.validate();
  if (data.size() < static_cast<std::size_t>(p.c)) {
    throw Error(Errc::TooFewPoints, std::to_string(data.size()) + " points for " + std::to_string(p.c) + " clusters");
  }
  return fcm(data, p, init_membership<Real>(data.size(), static_cast<std::size_t>(p.c), p.seed),
             std::forward<Observer>(on_round));
}

template <std::floating_point Real>
ClusterModel<Real> fcm(std::span<const Real> data, const FcmParams& p) {
  return fcm(data, p, [](const FcmRound<Real>&) {});
}

inline ClusterModel<double> fcm(const std::vector<double>& data, const FcmParams& p) {
  return fcm(std::span<const double>(data), p);
}

/// Per-row argmax; ties go to the lowest cluster index.
template <std::floating_point Real>
LabelMap hard_labels(const MembershipMatrix<Real>& w) {
  LabelMap out;
  out.c = static_cast<int>(w.cols());
  out.labels.resize(w.rows());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto row = w.row(i);
    out.labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline BinaryMask cluster_mask(const LabelMap& labels, int k, int width, int height) {
  if (k < 0 || k >= labels.c) {
    throw Error(Errc::BadIndex, "cluster " + std::to_string(k) + " outside [0, " + std::to_string(labels.c) + ")");
  }
  if (labels.labels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(Errc::DimMismatch, "label count does not match a " + std::to_string(width) + "x" +
                                       std::to_string(height) + " grid");
  }
  BinaryMask mask(width, height);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) mask.bits[i] = labels.labels[i] == k ? 1 : 0;
  return mask;
}

/// All c masks of a labeling, index-aligned with clusters.
inline std::vector<BinaryMask> cluster_masks(const LabelMap& labels, int width, int height) {
  std::vector<BinaryMask> masks;
  masks.reserve(labels.c);
  for (int k = 0; k < labels.c; ++k) masks.push_back(cluster_mask(labels, k, width, height));
  return masks;
}

template <std::floating_point Real = double>
struct KMeansResult {
  std::vector<Real> centroids;
  LabelMap labels;
  Real inertia = 0;
  int iterations = 0;
};

namespace detail {

template <std::floating_point Real>
int nearest_centroid(Real x, std::span<const Real> centroids) {
  int best = 0;
  Real best_d = (x - centroids[0]) * (x - centroids[0]);
  for (std::size_t j = 1; j < centroids.size(); ++j) {
    const Real d = (x - centroids[j]) * (x - centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd iterations from a seeded Forgy start (c distinct data points drawn
/// without replacement). An empty cluster is reseeded with the point that
/// lies farthest from its own centroid, taken from a cluster with at least
/// two members.
template <std::floating_point Real>
KMeansResult<Real> kmeans(std::span<const Real> data, int c, std::uint64_t seed, int max_iter = 100) {
  if (c < 1) throw Error(Errc::BadParams, "cluster count must be positive");
  if (max_iter < 1) throw Error(Errc::BadParams, "max_iter must be >= 1");
  detail::require_finite(data);
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(c)) {
    throw Error(Errc::TooFewPoints, std::to_string(n) + " points for " + std::to_string(c) + " clusters");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  KMeansResult<Real> out;
  out.centroids.resize(c);
  for (int j = 0; j < c; ++j) {
    const auto pick = j + detail::uniform_below(rng, n - j);
    std::swap(order[j], order[pick]);
    out.centroids[j] = data[order[j]];
  }

  out.labels.c = c;
  std::vector<int>& labels = out.labels.labels;
  labels.assign(n, -1);
  std::vector<int> next(n);
  for (int it = 1; it <= max_iter; ++it) {
    out.iterations = it;
    for (std::size_t i = 0; i < n; ++i) next[i] = detail::nearest_centroid(data[i], std::span<const Real>(out.centroids));
    const bool changed = next != labels;
    labels = next;

    std::vector<Real> sum(c, Real{0});
    std::vector<std::size_t> count(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[labels[i]] += data[i];
      ++count[labels[i]];
    }
    for (int j = 0; j < c; ++j) {
      if (count[j] > 0) out.centroids[j] = sum[j] / static_cast<Real>(count[j]);
    }

    bool reseeded = false;
    for (int j = 0; j < c; ++j) {
      if (count[j] > 0) continue;
      std::size_t far = n;
      Real far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[labels[i]] < 2) continue;
        const Real d = (data[i] - out.centroids[labels[i]]) * (data[i] - out.centroids[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      --count[labels[far]];
      labels[far] = j;
      count[j] = 1;
      out.centroids[j] = data[far];
      reseeded = true;
    }
    if (reseeded) {
      // Donor clusters lost a member; refresh their means.
      std::fill(sum.begin(), sum.end(), Real{0});
      for (std::size_t i = 0; i < n; ++i) sum[labels[i]] += data[i];
      for (int j = 0; j < c; ++j) {
        if (count[j] > 0) out.centroids[j] = sum[j] / static_cast<Real>(count[j]);
      }
    }
    if (!changed && !reseeded) break;
  }

  out.inertia = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real d = data[i] - out.centroids[labels[i]];
    out.inertia += d * d;
  }
  return out;
}

}  // namespace tumorscope

#endif  // TUMORSCOPE_FCM_HPP
