#ifndef TUMORSCOPE_NIFTI_HPP
#define TUMORSCOPE_NIFTI_HPP

// NIfTI-1 single-file (.nii) reader/writer plus axial slicing and in-plane
// nearest-neighbor resampling.

#include <tumorscope/error.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tumorscope {

/// 3D scalar grid, x fastest then y then z.
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<float> data;
  int datatype_code = 0;

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  float at(int x, int y, int z) const {
    return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x];
  }
};

/// One axial plane. pixels are row-major, width (x) fastest.
struct Slice {
  int width = 0;
  int height = 0;
  int index = 0;
  double z_mm = 0.0;
  std::vector<double> pixels;

  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace nifti {

inline constexpr std::size_t kHeaderSize = 348;
inline constexpr std::size_t kMinFileSize = 352;

// NIfTI-1 datatype codes.
inline constexpr int kUInt8 = 2;
inline constexpr int kInt16 = 4;
inline constexpr int kInt32 = 8;
inline constexpr int kFloat32 = 16;
inline constexpr int kFloat64 = 64;
inline constexpr int kInt8 = 256;
inline constexpr int kUInt16 = 512;
inline constexpr int kUInt32 = 768;

inline constexpr std::size_t kOffsetDim = 40;
inline constexpr std::size_t kOffsetDatatype = 70;
inline constexpr std::size_t kOffsetBitpix = 72;
inline constexpr std::size_t kOffsetPixdim = 76;
inline constexpr std::size_t kOffsetVoxOffset = 108;
inline constexpr std::size_t kOffsetSclSlope = 112;
inline constexpr std::size_t kOffsetSclInter = 116;
inline constexpr std::size_t kOffsetMagic = 344;

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T read(std::size_t offset) const {
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (swap_) std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

inline constexpr std::int32_t swap32(std::int32_t v) noexcept {
  const auto u = static_cast<std::uint32_t>(v);
  return static_cast<std::int32_t>((u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24));
}

inline std::size_t bytes_per_voxel(int datatype) {
  switch (datatype) {
    case kUInt8:
    case kInt8: return 1;
    case kInt16:
    case kUInt16: return 2;
    case kInt32:
    case kUInt32:
    case kFloat32: return 4;
    case kFloat64: return 8;
    default: return 0;
  }
}

inline double decode_voxel(const ByteReader& in, int datatype, std::size_t offset) {
  switch (datatype) {
    case kUInt8: return in.read<std::uint8_t>(offset);
    case kInt8: return in.read<std::int8_t>(offset);
    case kInt16: return in.read<std::int16_t>(offset);
    case kUInt16: return in.read<std::uint16_t>(offset);
    case kInt32: return in.read<std::int32_t>(offset);
    case kUInt32: return in.read<std::uint32_t>(offset);
    case kFloat32: return in.read<float>(offset);
    case kFloat64: return in.read<double>(offset);
    default: return 0.0;
  }
}

}  // namespace detail
}  // namespace nifti

/// Decodes a NIfTI-1 single-file image. Only the first 3D volume of a 4D+
/// series is read. Never reads outside `bytes`.
inline Volume parse_nifti(std::span<const std::uint8_t> bytes) {
  using namespace nifti;
  if (bytes.size() < kMinFileSize) {
    throw Error(Errc::TruncatedData, "file is " + std::to_string(bytes.size()) +
                                         " bytes, NIfTI-1 needs at least 352");
  }

  std::int32_t sizeof_hdr = 0;
  std::memcpy(&sizeof_hdr, bytes.data(), sizeof sizeof_hdr);
  if constexpr (std::endian::native == std::endian::big) sizeof_hdr = detail::swap32(sizeof_hdr);
  bool swap = false;
  if (sizeof_hdr == 348) {
    swap = std::endian::native == std::endian::big;
  } else if (detail::swap32(sizeof_hdr) == 348) {
    swap = std::endian::native == std::endian::little;
  } else if (sizeof_hdr == 540 || detail::swap32(sizeof_hdr) == 540) {
    throw Error(Errc::UnsupportedFormat, "NIfTI-2 headers are not supported");
  } else {
    throw Error(Errc::BadHeader, "sizeof_hdr is not 348 in either byte order");
  }
  const detail::ByteReader in(bytes, swap);

  const char* magic = reinterpret_cast<const char*>(bytes.data() + kOffsetMagic);
  if (std::memcmp(magic, "ni1\0", 4) == 0) {
    throw Error(Errc::UnsupportedFormat, "detached .hdr/.img pairs are not supported");
  }
  if (std::memcmp(magic, "n+1\0", 4) != 0) {
    throw Error(Errc::BadMagic, "magic is not \"n+1\"");
  }

  const auto ndim = in.read<std::int16_t>(kOffsetDim);
  if (ndim < 1 || ndim > 7) {
    throw Error(Errc::BadHeader, "dim[0] = " + std::to_string(ndim) + " outside 1..7");
  }
  Volume v;
  for (int axis = 0; axis < 3; ++axis) {
    if (axis < ndim) {
      const auto n = in.read<std::int16_t>(kOffsetDim + 2 * (axis + 1));
      const auto pd = in.read<float>(kOffsetPixdim + 4 * (axis + 1));
      if (n < 1) throw Error(Errc::BadHeader, "non-positive dimension on axis " + std::to_string(axis));
      if (!std::isfinite(pd) || pd <= 0.0f) {
        throw Error(Errc::BadHeader, "non-positive voxel spacing on axis " + std::to_string(axis));
      }
      v.dims[axis] = n;
      v.spacing[axis] = pd;
    } else {
      v.dims[axis] = 1;
      v.spacing[axis] = 1.0;
    }
  }

  v.datatype_code = in.read<std::int16_t>(kOffsetDatatype);
  const std::size_t bpv = detail::bytes_per_voxel(v.datatype_code);
  if (bpv == 0) {
    throw Error(Errc::UnsupportedDatatype, "datatype code " + std::to_string(v.datatype_code));
  }

  const float vox_offset = in.read<float>(kOffsetVoxOffset);
  if (!std::isfinite(vox_offset) || vox_offset < static_cast<float>(kMinFileSize)) {
    throw Error(Errc::BadHeader, "vox_offset must be at least 352");
  }
  if (static_cast<double>(vox_offset) > static_cast<double>(bytes.size())) {
    throw Error(Errc::TruncatedData, "vox_offset beyond end of file");
  }
  const auto start = static_cast<std::size_t>(vox_offset);
  const std::size_t count = v.voxel_count();
  if ((bytes.size() - start) / bpv < count) {
    throw Error(Errc::TruncatedData, "payload holds fewer than " + std::to_string(count) + " voxels");
  }

  const float slope = in.read<float>(kOffsetSclSlope);
  const float inter = in.read<float>(kOffsetSclInter);
  const bool scaled = slope != 0.0f && std::isfinite(slope);

  v.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    double value = detail::decode_voxel(in, v.datatype_code, start + i * bpv);
    if (scaled) value = value * slope + inter;
    if (!std::isfinite(value) || std::abs(value) > std::numeric_limits<float>::max()) {
      throw Error(Errc::NonFiniteVoxel, "voxel " + std::to_string(i) + " is not finite");
    }
    v.data[i] = static_cast<float>(value);
  }
  return v;
}

/// Serializes as little-endian float32 NIfTI-1 with vox_offset 352.
inline std::vector<std::uint8_t> write_nifti(const Volume& v) {
  using namespace nifti;
  std::vector<std::uint8_t> out(kMinFileSize + v.data.size() * sizeof(float), 0);
  // All multi-byte fields are stored little-endian regardless of host.
  const auto le = [&](std::size_t offset, auto value) {
    auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(value)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::copy(raw.begin(), raw.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
  };
  le(0, std::int32_t{348});
  le(kOffsetDim, std::int16_t{3});
  for (int axis = 0; axis < 3; ++axis) {
    le(kOffsetDim + 2 * (axis + 1), static_cast<std::int16_t>(v.dims[axis]));
    le(kOffsetPixdim + 4 * (axis + 1), static_cast<float>(v.spacing[axis]));
  }
  for (int axis = 3; axis < 7; ++axis) le(kOffsetDim + 2 * (axis + 1), std::int16_t{1});
  le(kOffsetPixdim, 1.0f);
  le(kOffsetDatatype, static_cast<std::int16_t>(kFloat32));
  le(kOffsetBitpix, std::int16_t{32});
  le(kOffsetVoxOffset, 352.0f);
  std::memcpy(out.data() + kOffsetMagic, "n+1\0", 4);
  for (std::size_t i = 0; i < v.data.size(); ++i) le(kMinFileSize + 4 * i, v.data[i]);
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

inline Volume read_nifti(const std::filesystem::path& path) { return parse_nifti(read_file_bytes(path)); }

namespace detail {

// Nearest integer to t; exact halves go to the lower integer.
inline long long round_half_down(double t) { return static_cast<long long>(std::ceil(t - 0.5)); }

// Ceiling division for a possibly negative numerator and positive denominator.
inline long long ceil_div(long long num, long long den) {
  return num >= 0 ? (num + den - 1) / den : -((-num) / den);
}

}  // namespace detail

/// Number of planes sampled at `gap_mm` over an axial extent of (nz-1)*dz.
inline int axial_slice_count(const Volume& v, double gap_mm) {
  const double extent = (v.dims[2] - 1) * v.spacing[2];
  return static_cast<int>(std::floor(extent / gap_mm + 1e-9)) + 1;
}

/// Samples axial planes at z = 0, gap, 2*gap, ... measured from the first
/// voxel plane; each position snaps to the nearest plane.
inline std::vector<Slice> extract_axial_slices(const Volume& v, double gap_mm) {
  const double dz = v.spacing[2];
  if (!std::isfinite(gap_mm) || gap_mm < dz) {
    throw Error(Errc::GapTooSmall, "gap " + std::to_string(gap_mm) + " mm is below the axial spacing " +
                                       std::to_string(dz) + " mm");
  }
  const int count = axial_slice_count(v, gap_mm);
  const std::size_t plane = static_cast<std::size_t>(v.dims[0]) * v.dims[1];
  std::vector<Slice> slices;
  slices.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double z = k * gap_mm;
    const auto z_index = std::clamp<long long>(detail::round_half_down(z / dz), 0, v.dims[2] - 1);
    Slice s;
    s.width = v.dims[0];
    s.height = v.dims[1];
    s.index = k;
    s.z_mm = z;
    const auto first = v.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(z_index) * plane);
    s.pixels.assign(first, first + static_cast<std::ptrdiff_t>(plane));
    slices.push_back(std::move(s));
  }
  return slices;
}

/// Min-max rescale to [0, 1]; a constant slice maps to all zeros.
inline Slice normalize_intensities(const Slice& s) {
  Slice out = s;
  if (s.pixels.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(s.pixels.begin(), s.pixels.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  for (auto& p : out.pixels) p = range > 0.0 ? (p - lo) / range : 0.0;
  return out;
}

/// Source index whose cell center is nearest the center of destination cell
/// `dst` when `src_n` cells are stretched over `dst_n`. Ties choose the lower
/// index. Integer arithmetic only.
inline int nearest_source_index(int dst, int dst_n, int src_n) {
  // center_src = ((2*dst + 1) * src_n - dst_n) / (2 * dst_n); result = ceil(center_src - 1/2)
  const long long num = (2LL * dst + 1) * src_n - 2LL * dst_n;
  const long long idx = detail::ceil_div(num, 2LL * dst_n);
  return static_cast<int>(std::clamp<long long>(idx, 0, src_n - 1));
}

inline Slice resample_to_grid(const Slice& s, int width, int height) {
  if (s.width == width && s.height == height) return s;
  Slice out;
  out.width = width;
  out.height = height;
  out.index = s.index;
  out.z_mm = s.z_mm;
  out.pixels.resize(static_cast<std::size_t>(width) * height);
  std::vector<int> xs(width);
  for (int x = 0; x < width; ++x) xs[x] = nearest_source_index(x, width, s.width);
  for (int y = 0; y < height; ++y) {
    const int sy = nearest_source_index(y, height, s.height);
    for (int x = 0; x < width; ++x) out.pixels[static_cast<std::size_t>(y) * width + x] = s.at(xs[x], sy);
  }
  return out;
}

}  // namespace tumorscope

#endif  // TUMORSCOPE_NIFTI_HPP
