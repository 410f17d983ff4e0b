#ifndef TUMORSCOPE_PHANTOM_HPP
#define TUMORSCOPE_PHANTOM_HPP

// Synthetic volumes and a matching fixture atlas. The fixture places the
// right hemisphere on the low-x half of the grid (radiological convention).

#include <tumorscope/atlas.hpp>
#include <tumorscope/mask.hpp>
#include <tumorscope/nifti.hpp>

#include <cmath>

namespace tumorscope::phantom {

struct Rect {
  int x, y, w, h;
};

inline constexpr int kBlobSlice = 5;
inline constexpr Rect kBlob{12, 40, 12, 12};
inline constexpr Rect kRightBA4{6, 32, 26, 28};
inline constexpr Rect kRightBA6{6, 8, 26, 24};
inline constexpr Rect kLeftBA4{47, 32, 26, 28};
inline constexpr Rect kLeftBA17{45, 70, 30, 20};
inline constexpr float kBackground = 0.1f;
inline constexpr float kBlobIntensity = 0.95f;

/// 79x95x20 at 2x2x10 mm: constant background with one bright 12x12 blob on
/// plane kBlobSlice.
inline Volume blob_volume() {
  Volume v;
  v.dims = {kAtlasWidth, kAtlasHeight, 20};
  v.spacing = {2.0, 2.0, 10.0};
  v.datatype_code = nifti::kFloat32;
  v.data.assign(v.voxel_count(), kBackground);
  const std::size_t plane = static_cast<std::size_t>(kAtlasWidth) * kAtlasHeight;
  for (int y = kBlob.y; y < kBlob.y + kBlob.h; ++y)
    for (int x = kBlob.x; x < kBlob.x + kBlob.w; ++x)
      v.data[kBlobSlice * plane + static_cast<std::size_t>(y) * kAtlasWidth + x] = kBlobIntensity;
  return v;
}

/// 79x95xnz at 1 mm with smooth in-plane structure that varies with z.
inline Volume extent_volume(int nz = 160) {
  Volume v;
  v.dims = {kAtlasWidth, kAtlasHeight, nz};
  v.spacing = {2.0, 2.0, 1.0};
  v.datatype_code = nifti::kFloat32;
  v.data.resize(v.voxel_count());
  std::size_t i = 0;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < kAtlasHeight; ++y)
      for (int x = 0; x < kAtlasWidth; ++x, ++i) {
        const double dx = (x - 39.0) / 30.0;
        const double dy = (y - 47.0) / 38.0;
        const double r2 = dx * dx + dy * dy;
        double value = r2 < 1.0 ? 0.4 + 0.2 * std::cos(3.0 * dx + 0.05 * z) : 0.0;
        if (std::hypot(x - 25.0, y - 50.0) < 6.0 && z >= 60 && z < 90) value = 1.0;
        v.data[i] = static_cast<float>(value);
      }
  return v;
}

inline BinaryMask rect_mask(Rect r) {
  BinaryMask m(kAtlasWidth, kAtlasHeight);
  m.fill_rect(r.x, r.y, r.w, r.h);
  return m;
}

/// Areas on slices 4..6. Only Right BA4 on slice kBlobSlice contains the blob.
inline Atlas fixture_atlas() {
  Atlas atlas;
  for (int s = kBlobSlice - 1; s <= kBlobSlice + 1; ++s) {
    atlas.add({s, Hemisphere::Right, 4, rect_mask(kRightBA4)});
    atlas.add({s, Hemisphere::Right, 6, rect_mask(kRightBA6)});
    atlas.add({s, Hemisphere::Left, 4, rect_mask(kLeftBA4)});
  }
  atlas.add({kBlobSlice, Hemisphere::Left, 17, rect_mask(kLeftBA17)});
  return atlas;
}

}  // namespace tumorscope::phantom

#endif  // TUMORSCOPE_PHANTOM_HPP
