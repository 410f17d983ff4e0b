#ifndef TUMORSCOPE_ATLAS_HPP
#define TUMORSCOPE_ATLAS_HPP

// Per-slice, per-hemisphere Brodmann-area mask database and the overlap
// rule that maps a tumor mask onto it.
//
// Manifest layout (UTF-8 JSON, paths relative to the manifest):
//   {"version": 1, "grid": [79, 95],
//    "entries": [{"slice": 5, "hemisphere": "R", "area": 4, "mask": "s005_R_04.png"}, ...]}

#include <tumorscope/brodmann_names.hpp>
#include <tumorscope/error.hpp>
#include <tumorscope/mask.hpp>
#include <tumorscope/nifti.hpp>
#include <tumorscope/png.hpp>

#include <nlohmann/json.hpp>

#include <compare>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tumorscope {

enum class Hemisphere { Left, Right };

constexpr std::string_view hemisphere_code(Hemisphere h) noexcept { return h == Hemisphere::Left ? "L" : "R"; }
constexpr std::string_view hemisphere_name(Hemisphere h) noexcept {
  return h == Hemisphere::Left ? "Left" : "Right";
}

/// Accepts "L"/"R" as well as "Left"/"Right".
inline Hemisphere parse_hemisphere(std::string_view s) {
  if (s == "L" || s == "Left") return Hemisphere::Left;
  if (s == "R" || s == "Right") return Hemisphere::Right;
  throw Error(Errc::BadManifest, "hemisphere must be \"L\" or \"R\", got \"" + std::string(s) + "\"");
}

inline std::string anatomical_name(int area_id) {
  if (area_id < kMinAreaId || area_id > kMaxAreaId) {
    throw Error(Errc::BadAreaId, "Brodmann area " + std::to_string(area_id) + " outside 1..47");
  }
  return std::string(kBrodmannNames[static_cast<std::size_t>(area_id - 1)]);
}

struct AtlasKey {
  int slice_index = 0;
  Hemisphere hemisphere = Hemisphere::Left;
  int area_id = 0;

  friend auto operator<=>(const AtlasKey&, const AtlasKey&) = default;
};

struct AtlasEntry {
  int slice_index = 0;
  Hemisphere hemisphere = Hemisphere::Left;
  int area_id = 0;
  BinaryMask mask;

  AtlasKey key() const noexcept { return {slice_index, hemisphere, area_id}; }
};

/// Immutable once built; entries iterate in (slice, hemisphere, area) order.
class Atlas {
 public:
  using Storage = std::map<AtlasKey, AtlasEntry>;

  void add(AtlasEntry entry) {
    if (entry.area_id < kMinAreaId || entry.area_id > kMaxAreaId) {
      throw Error(Errc::BadAreaId, "area " + std::to_string(entry.area_id) + " outside 1..47");
    }
    if (entry.mask.width != kAtlasWidth || entry.mask.height != kAtlasHeight) {
      throw Error(Errc::MaskDimensionMismatch, "area mask is " + std::to_string(entry.mask.width) + "x" +
                                                   std::to_string(entry.mask.height) + ", expected 79x95");
    }
    const AtlasKey key = entry.key();
    if (!entries_.emplace(key, std::move(entry)).second) {
      throw Error(Errc::DuplicateKey, "slice " + std::to_string(key.slice_index) + " hemisphere " +
                                          std::string(hemisphere_code(key.hemisphere)) + " area " +
                                          std::to_string(key.area_id) + " listed twice");
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const Storage& entries() const noexcept { return entries_; }

  const AtlasEntry* find(const AtlasKey& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  /// Entries on one slice, in (hemisphere, area) order.
  std::vector<const AtlasEntry*> on_slice(int slice_index) const {
    std::vector<const AtlasEntry*> out;
    for (auto it = entries_.lower_bound({slice_index, Hemisphere::Left, 0});
         it != entries_.end() && it->first.slice_index == slice_index; ++it) {
      out.push_back(&it->second);
    }
    return out;
  }

 private:
  Storage entries_;
};

inline Atlas load_atlas(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_regular_file(manifest_path, ec)) {
    throw Error(Errc::ManifestMissing, "no atlas manifest at " + manifest_path.string());
  }
  nlohmann::json doc;
  {
    std::ifstream in(manifest_path);
    if (!in) throw Error(Errc::ManifestMissing, "cannot open " + manifest_path.string());
    doc = nlohmann::json::parse(in, nullptr, false);
  }
  if (doc.is_discarded() || !doc.is_object()) throw Error(Errc::BadManifest, "manifest is not a JSON object");

  try {
    if (doc.at("version").get<int>() != 1) throw Error(Errc::BadManifest, "unsupported manifest version");
    const auto grid = doc.at("grid").get<std::vector<int>>();
    if (grid != std::vector<int>{kAtlasWidth, kAtlasHeight}) {
      throw Error(Errc::MaskDimensionMismatch, "manifest grid must be [79, 95]");
    }
    const fs::path base = manifest_path.parent_path();
    Atlas atlas;
    for (const auto& item : doc.at("entries")) {
      AtlasEntry entry;
      entry.slice_index = item.at("slice").get<int>();
      entry.hemisphere = parse_hemisphere(item.at("hemisphere").get<std::string>());
      entry.area_id = item.at("area").get<int>();
      if (entry.area_id < kMinAreaId || entry.area_id > kMaxAreaId) {
        throw Error(Errc::BadAreaId, "area " + std::to_string(entry.area_id) + " outside 1..47");
      }
      const fs::path mask_path = base / item.at("mask").get<std::string>();
      std::vector<std::uint8_t> bytes;
      try {
        bytes = read_file_bytes(mask_path);
      } catch (const Error&) {
        throw Error(Errc::MaskDecode, "cannot read mask " + mask_path.string());
      }
      entry.mask = png::decode_mask(bytes);
      atlas.add(std::move(entry));
    }
    return atlas;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadManifest, e.what());
  }
}

/// Writes `manifest.json` and one PNG per entry into `dir`.
inline std::filesystem::path save_atlas(const Atlas& atlas, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["grid"] = {kAtlasWidth, kAtlasHeight};
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& [key, entry] : atlas.entries()) {
    char name[64];
    std::snprintf(name, sizeof name, "s%03d_%s_%02d.png", key.slice_index,
                  std::string(hemisphere_code(key.hemisphere)).c_str(), key.area_id);
    write_file_bytes(dir / name, png::encode_mask(entry.mask));
    nlohmann::ordered_json item;
    item["slice"] = key.slice_index;
    item["hemisphere"] = std::string(hemisphere_code(key.hemisphere));
    item["area"] = key.area_id;
    item["mask"] = name;
    doc["entries"].push_back(std::move(item));
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + manifest.string());
  out << doc.dump(2) << '\n';
  return manifest;
}

struct OverlapHit {
  Hemisphere hemisphere = Hemisphere::Left;
  int area_id = 0;
  std::string anatomical_name;
  std::size_t overlap_pixels = 0;
  double overlap_fraction = 0.0;  // over the tumor's set-pixel count

  friend bool operator==(const OverlapHit&, const OverlapHit&) = default;
};

struct OverlapReport {
  int slice_index = 0;
  std::vector<OverlapHit> hits;  // sorted by (hemisphere, area_id)

  friend bool operator==(const OverlapReport&, const OverlapReport&) = default;
};

/// Counts pixels where tumor + area (as 0/1 images) exceeds 1.
inline std::size_t summed_overlap(const BinaryMask& tumor, const BinaryMask& area) {
  require_same_shape(tumor, area);
  std::size_t n = 0;
  for (std::size_t i = 0; i < tumor.bits.size(); ++i) {
    const int sum = static_cast<int>(tumor.bits[i] != 0) + static_cast<int>(area.bits[i] != 0);
    if (sum > 1) ++n;
  }
  return n;
}

/// Reports every area on `slice_index` sharing at least `min_pixels`
/// pixels with the tumor. An empty tumor gives an empty report.
inline OverlapReport overlap_detect(const BinaryMask& tumor, const Atlas& atlas, int slice_index,
                                    std::size_t min_pixels = 1) {
  if (tumor.width != kAtlasWidth || tumor.height != kAtlasHeight) {
    throw Error(Errc::DimMismatch, "tumor mask is " + std::to_string(tumor.width) + "x" +
                                       std::to_string(tumor.height) + ", expected 79x95");
  }
  if (min_pixels == 0) min_pixels = 1;
  OverlapReport report;
  report.slice_index = slice_index;
  const std::size_t tumor_pixels = tumor.count();
  if (tumor_pixels == 0) return report;
  for (const AtlasEntry* entry : atlas.on_slice(slice_index)) {
    const std::size_t pixels = summed_overlap(tumor, entry->mask);
    if (pixels < min_pixels) continue;
    report.hits.push_back({entry->hemisphere, entry->area_id, anatomical_name(entry->area_id), pixels,
                           static_cast<double>(pixels) / static_cast<double>(tumor_pixels)});
  }
  return report;
}

}  // namespace tumorscope

#endif  // TUMORSCOPE_ATLAS_HPP
