#ifndef TUMORSCOPE_TESTS_SUPPORT_HPP
#define TUMORSCOPE_TESTS_SUPPORT_HPP

// Independent oracles and fixture builders shared by the unit and
// acceptance suites. Nothing here calls into the code paths it checks.

#include <tumorscope/mask.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace tumorscope::testing {

/// Hand-built NIfTI-1 byte image, written field by field at the standard
/// offsets.
struct NiftiFixture {
  std::array<std::int16_t, 8> dim{3, 4, 4, 2, 1, 1, 1, 1};
  std::array<float, 8> pixdim{1, 1, 1, 1, 0, 0, 0, 0};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  float vox_offset = 352;
  float scl_slope = 0;
  float scl_inter = 0;
  char magic[4] = {'n', '+', '1', '\0'};
  bool big_endian = false;
  std::vector<std::uint8_t> payload;  // already encoded in the file's byte order

  template <typename T>
  void put(std::vector<std::uint8_t>& out, std::size_t offset, T value) const {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    const bool host_big = std::endian::native == std::endian::big;
    if (host_big != big_endian) std::reverse(raw.begin(), raw.end());
    std::copy(raw.begin(), raw.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
  }

  template <typename T>
  void append(T value) {
    std::vector<std::uint8_t> tmp(sizeof(T));
    put(tmp, 0, value);
    payload.insert(payload.end(), tmp.begin(), tmp.end());
  }

  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(vox_offset), 0);
    put(out, 0, std::int32_t{348});
    for (int i = 0; i < 8; ++i) put(out, 40 + 2 * i, dim[i]);
    put(out, 70, datatype);
    put(out, 72, bitpix);
    for (int i = 0; i < 8; ++i) put(out, 76 + 4 * i, pixdim[i]);
    put(out, 108, vox_offset);
    put(out, 112, scl_slope);
    put(out, 116, scl_inter);
    std::memcpy(out.data() + 344, magic, 4);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
  }
};

/// Reference FCM written from the textbook update in the form
/// w_ij = d_ij^(-2/(m-1)) / sum_k d_ik^(-2/(m-1)), iterated to a tight
/// fixed point from the given start.
inline std::vector<double> reference_fcm(const std::vector<double>& x, std::vector<std::vector<double>> w, double m,
                                         double tol = 1e-13, int max_iter = 100000) {
  const std::size_t n = x.size();
  const std::size_t c = w[0].size();
  std::vector<double> cen(c);
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t j = 0; j < c; ++j) {
      double num = 0, den = 0;
      for (std::size_t i = 0; i < n; ++i) {
        num += std::pow(w[i][j], m) * x[i];
        den += std::pow(w[i][j], m);
      }
      cen[j] = num / den;
    }
    double change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> inv(c);
      double total = 0;
      std::size_t hit = c;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = std::abs(x[i] - cen[j]);
        if (d == 0 && hit == c) hit = j;
        inv[j] = d == 0 ? 0 : std::pow(d, -2.0 / (m - 1.0));
        total += inv[j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        const double nw = hit != c ? (j == hit ? 1.0 : 0.0) : inv[j] / total;
        change = std::max(change, std::abs(nw - w[i][j]));
        w[i][j] = nw;
      }
    }
    if (change < tol) break;
  }
  std::sort(cen.begin(), cen.end());
  return cen;
}

struct Partition {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

/// Minimum-inertia labeling over all c^n assignments using every cluster.
inline Partition exhaustive_kmeans(const std::vector<double>& x, int c) {
  const std::size_t n = x.size();
  Partition best;
  std::vector<int> lab(n, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(c);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rest = code;
    for (std::size_t i = 0; i < n; ++i) {
      lab[i] = static_cast<int>(rest % c);
      rest /= c;
    }
    std::vector<double> sum(c, 0);
    std::vector<int> cnt(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[lab[i]] += x[i];
      ++cnt[lab[i]];
    }
    if (std::find(cnt.begin(), cnt.end(), 0) != cnt.end()) continue;
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - sum[lab[i]] / cnt[lab[i]];
      inertia += d * d;
    }
    if (inertia < best.inertia - 1e-15) best = {lab, inertia};
  }
  return best;
}

/// True when two labelings induce the same partition of the points.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

/// Two tight clusters of `per_blob` points around `lo` and `hi`.
inline std::vector<double> two_blob_data(std::mt19937_64& rng, int per_blob, double lo, double hi, double spread) {
  std::uniform_real_distribution<double> jitter(-spread, spread);
  std::vector<double> x;
  for (int i = 0; i < per_blob; ++i) x.push_back(lo + jitter(rng));
  for (int i = 0; i < per_blob; ++i) x.push_back(hi + jitter(rng));
  std::shuffle(x.begin(), x.end(), rng);
  return x;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  BinaryMask m(w, h);
  for (auto& b : m.bits) b = on(rng) ? 1 : 0;
  return m;
}

inline std::size_t and_count(const BinaryMask& a, const BinaryMask& b) {
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      if (a.at(x, y) && b.at(x, y)) ++n;
  return n;
}

/// Lowest source index whose cell center is closest to destination cell
/// `i`'s center, compared exactly as |(2j+1)*dst_n - (2i+1)*src_n|.
inline int brute_nearest_index(int i, int dst_n, int src_n) {
  long long best = -1;
  int arg = 0;
  for (int j = 0; j < src_n; ++j) {
    const long long d = std::llabs((2LL * j + 1) * dst_n - (2LL * i + 1) * src_n);
    if (best < 0 || d < best) {
      best = d;
      arg = j;
    }
  }
  return arg;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tumorscope_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tumorscope::testing

#endif  // TUMORSCOPE_TESTS_SUPPORT_HPP
