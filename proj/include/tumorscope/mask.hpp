#ifndef TUMORSCOPE_MASK_HPP
#define TUMORSCOPE_MASK_HPP

#include <tumorscope/error.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace tumorscope {

/// Grid geometry shared by every atlas mask and tumor mask.
inline constexpr int kAtlasWidth = 79;
inline constexpr int kAtlasHeight = 95;

/// 2D boolean grid, row-major. Each element of `bits` is 0 or 1.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t size() const noexcept { return bits.size(); }

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool on = true) { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
  }

  /// Sets every pixel in [x0, x0+w) x [y0, y0+h), clipped to the grid.
  void fill_rect(int x0, int y0, int w, int h) {
    for (int y = std::max(0, y0); y < std::min(height, y0 + h); ++y)
      for (int x = std::max(0, x0); x < std::min(width, x0 + w); ++x) set(x, y);
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(Errc::DimMismatch, std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                       std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

}  // namespace tumorscope

#endif  // TUMORSCOPE_MASK_HPP
