#ifndef TUMORSCOPE_PIPELINE_HPP
#define TUMORSCOPE_PIPELINE_HPP

// parse -> slice -> normalize -> resample -> cluster -> (select) -> overlap
// -> report.json + candidate PNGs.

#include <tumorscope/atlas.hpp>
#include <tumorscope/error.hpp>
#include <tumorscope/fcm.hpp>
#include <tumorscope/mask.hpp>
#include <tumorscope/nifti.hpp>
#include <tumorscope/png.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace tumorscope {

enum class SelectionMode { Manual, Explicit, Auto };

struct PipelineConfig {
  std::filesystem::path input_nifti;
  std::filesystem::path atlas_manifest;
  std::filesystem::path output_dir;
  double gap_mm = 10.0;
  FcmParams fcm;
  std::optional<std::vector<int>> slices;  // nullopt: every extracted slice
  SelectionMode selection = SelectionMode::Manual;
  std::map<int, int> explicit_selection;  // slice index -> cluster index
  std::size_t min_overlap_pixels = 1;
  double auto_max_coverage = 0.30;
  unsigned workers = 1;
};

struct SliceResult {
  int slice_index = 0;
  std::vector<double> centroids;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> candidates;  // relative to the output directory
  std::optional<int> selected;
  std::optional<OverlapReport> report;

  friend bool operator==(const SliceResult&, const SliceResult&) = default;
};

struct RunReport {
  std::string input;
  std::string atlas;
  double gap_mm = 10.0;
  FcmParams params;
  std::vector<SliceResult> slices;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Clustering of one slice on the atlas grid.
struct SliceSegmentation {
  Slice slice;  // normalized, 79x95
  ClusterModel<double> model;
  LabelMap labels;
  std::vector<BinaryMask> masks;
};

/// Process exit status for a failure category.
inline int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::ManifestMissing:
    case Errc::BadManifest:
    case Errc::MaskDecode:
    case Errc::MaskDimensionMismatch:
    case Errc::DuplicateKey:
    case Errc::BadAreaId: return 3;
    case Errc::IoFailure: return 4;
    default: return 2;
  }
}

inline SliceSegmentation segment_slice(const Slice& raw, const FcmParams& params) {
  SliceSegmentation out;
  out.slice = resample_to_grid(normalize_intensities(raw), kAtlasWidth, kAtlasHeight);
  out.model = fcm(std::span<const double>(out.slice.pixels), params);
  out.labels = hard_labels(out.model.membership);
  out.masks = cluster_masks(out.labels, kAtlasWidth, kAtlasHeight);
  return out;
}

/// Brightest non-empty cluster covering at most `max_coverage` of the grid;
/// ties go to the lowest index.
inline int auto_select_cluster(const ClusterModel<double>& model, std::span<const BinaryMask> masks,
                               double max_coverage = 0.30) {
  std::optional<int> best;
  for (std::size_t k = 0; k < masks.size(); ++k) {
    const std::size_t set = masks[k].count();
    if (set == 0 || masks[k].size() == 0) continue;
    if (static_cast<double>(set) / static_cast<double>(masks[k].size()) > max_coverage) continue;
    if (!best || model.centroids[k] > model.centroids[static_cast<std::size_t>(*best)]) best = static_cast<int>(k);
  }
  if (!best) throw Error(Errc::NoCandidate, "every non-empty cluster covers more than the coverage cap");
  return *best;
}

inline std::string candidate_file_name(int slice_index, int k) {
  char name[48];
  std::snprintf(name, sizeof name, "slice_%03d_cluster_%d.png", slice_index, k);
  return name;
}

namespace detail {

inline Error annotate(const Error& e, int slice_index) {
  return Error(e.code(), "slice " + std::to_string(slice_index) + ": " + e.detail());
}

inline nlohmann::ordered_json params_json(const FcmParams& p) {
  nlohmann::ordered_json j;
  j["c"] = p.c;
  j["m"] = p.m;
  j["epsilon"] = p.epsilon;
  j["max_iter"] = p.max_iter;
  j["seed"] = p.seed;
  return j;
}

}  // namespace detail

inline std::string report_to_json(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["input"] = report.input;
  doc["atlas"] = report.atlas;
  auto params = detail::params_json(report.params);
  params["gap_mm"] = report.gap_mm;
  doc["params"] = std::move(params);
  doc["slices"] = nlohmann::ordered_json::array();
  for (const SliceResult& s : report.slices) {
    nlohmann::ordered_json j;
    j["index"] = s.slice_index;
    j["centroids"] = s.centroids;
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    j["candidates"] = s.candidates;
    j["selected"] = s.selected ? nlohmann::ordered_json(*s.selected) : nlohmann::ordered_json(nullptr);
    if (s.report) {
      j["hits"] = nlohmann::ordered_json::array();
      for (const OverlapHit& h : s.report->hits) {
        nlohmann::ordered_json hit;
        hit["hemisphere"] = std::string(hemisphere_name(h.hemisphere));
        hit["area"] = h.area_id;
        hit["name"] = h.anatomical_name;
        hit["pixels"] = h.overlap_pixels;
        hit["fraction"] = h.overlap_fraction;
        j["hits"].push_back(std::move(hit));
      }
    } else {
      j["hits"] = nullptr;
    }
    doc["slices"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

inline RunReport parse_report(const std::string& text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::IoFailure, "report is not valid JSON");
  try {
    RunReport r;
    r.input = doc.at("input").get<std::string>();
    r.atlas = doc.at("atlas").get<std::string>();
    const auto& p = doc.at("params");
    r.params.c = p.at("c").get<int>();
    r.params.m = p.at("m").get<double>();
    r.params.epsilon = p.at("epsilon").get<double>();
    r.params.max_iter = p.at("max_iter").get<int>();
    r.params.seed = p.at("seed").get<std::uint64_t>();
    r.gap_mm = p.at("gap_mm").get<double>();
    for (const auto& j : doc.at("slices")) {
      SliceResult s;
      s.slice_index = j.at("index").get<int>();
      s.centroids = j.at("centroids").get<std::vector<double>>();
      s.iterations = j.at("iterations").get<int>();
      s.converged = j.at("converged").get<bool>();
      s.candidates = j.at("candidates").get<std::vector<std::string>>();
      if (!j.at("selected").is_null()) s.selected = j.at("selected").get<int>();
      if (!j.at("hits").is_null()) {
        OverlapReport rep;
        rep.slice_index = s.slice_index;
        for (const auto& h : j.at("hits")) {
          rep.hits.push_back({parse_hemisphere(h.at("hemisphere").get<std::string>()), h.at("area").get<int>(),
                              h.at("name").get<std::string>(), h.at("pixels").get<std::size_t>(),
                              h.at("fraction").get<double>()});
        }
        s.report = std::move(rep);
      }
      r.slices.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoFailure, std::string("malformed report: ") + e.what());
  }
}

/// Writes report.json and, when given, the candidate PNGs (one list per
/// slice, aligned with report.slices) into `out_dir`.
inline void emit_report(const RunReport& report, const std::filesystem::path& out_dir,
                        std::span<const std::vector<BinaryMask>> candidate_masks = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  for (std::size_t s = 0; s < candidate_masks.size() && s < report.slices.size(); ++s) {
    const auto& names = report.slices[s].candidates;
    for (std::size_t k = 0; k < candidate_masks[s].size() && k < names.size(); ++k) {
      write_file_bytes(out_dir / names[k], png::encode_mask(candidate_masks[s][k]));
    }
  }
  const std::string text = report_to_json(report);
  const fs::path path = out_dir / "report.json";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoFailure, "write failed for " + path.string());
}

struct PipelineRun {
  RunReport report;
  std::vector<std::vector<BinaryMask>> candidate_masks;  // aligned with report.slices
};

/// Runs every stage but writes nothing.
inline PipelineRun process(const PipelineConfig& cfg, const Volume& volume, const Atlas& atlas) {
  cfg.fcm.validate();
  if (!(cfg.gap_mm > 0.0)) throw Error(Errc::GapTooSmall, "gap_mm must be positive");
  const std::vector<Slice> all = extract_axial_slices(volume, cfg.gap_mm);

  std::vector<int> wanted;
  if (cfg.slices) {
    wanted = *cfg.slices;
    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    for (int s : wanted) {
      if (s < 0 || s >= static_cast<int>(all.size())) {
        throw Error(Errc::BadIndex, "slice " + std::to_string(s) + " outside [0, " + std::to_string(all.size()) + ")");
      }
    }
  } else {
    for (int s = 0; s < static_cast<int>(all.size()); ++s) wanted.push_back(s);
  }
  for (const auto& [s, k] : cfg.explicit_selection) {
    if (cfg.selection != SelectionMode::Explicit) break;
    if (!std::binary_search(wanted.begin(), wanted.end(), s)) {
      throw Error(Errc::BadIndex, "selection names slice " + std::to_string(s) + " which is not processed");
    }
    if (k < 0 || k >= cfg.fcm.c) {
      throw Error(Errc::BadIndex, "selection " + std::to_string(s) + ":" + std::to_string(k) +
                                      " names a cluster outside [0, " + std::to_string(cfg.fcm.c) + ")");
    }
  }

  PipelineRun run;
  run.report.input = cfg.input_nifti.string();
  run.report.atlas = cfg.atlas_manifest.string();
  run.report.gap_mm = cfg.gap_mm;
  run.report.params = cfg.fcm;
  run.report.slices.resize(wanted.size());
  run.candidate_masks.resize(wanted.size());
  std::vector<std::exception_ptr> failures(wanted.size());

  const auto work = [&](std::size_t i) {
    const int index = wanted[i];
    try {
      SliceSegmentation seg = segment_slice(all[static_cast<std::size_t>(index)], cfg.fcm);
      SliceResult& r = run.report.slices[i];
      r.slice_index = index;
      r.centroids = seg.model.centroids;
      r.iterations = seg.model.iterations;
      r.converged = seg.model.converged;
      for (int k = 0; k < cfg.fcm.c; ++k) r.candidates.push_back(candidate_file_name(index, k));

      if (cfg.selection == SelectionMode::Explicit) {
        if (const auto it = cfg.explicit_selection.find(index); it != cfg.explicit_selection.end()) {
          r.selected = it->second;
        }
      } else if (cfg.selection == SelectionMode::Auto) {
        try {
          r.selected = auto_select_cluster(seg.model, seg.masks, cfg.auto_max_coverage);
        } catch (const Error& e) {
          if (e.code() != Errc::NoCandidate) throw;
        }
      }
      if (r.selected) {
        r.report = overlap_detect(seg.masks[static_cast<std::size_t>(*r.selected)], atlas, index,
                                  cfg.min_overlap_pixels);
      }
      run.candidate_masks[i] = std::move(seg.masks);
    } catch (const Error& e) {
      failures[i] = std::make_exception_ptr(detail::annotate(e, index));
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.workers, static_cast<unsigned>(wanted.size())));
  if (workers <= 1) {
    for (std::size_t i = 0; i < wanted.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < wanted.size(); i = next++) work(i);
      });
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return run;
}

/// Full batch run: validates inputs, processes, writes outputs.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_regular_file(cfg.input_nifti, ec)) {
    throw Error(Errc::InputMissing, "no input volume at " + cfg.input_nifti.string());
  }
  const Atlas atlas = load_atlas(cfg.atlas_manifest);
  const Volume volume = read_nifti(cfg.input_nifti);
  PipelineRun run = process(cfg, volume, atlas);
  emit_report(run.report, cfg.output_dir, run.candidate_masks);
  return std::move(run.report);
}

}  // namespace tumorscope

#endif  // TUMORSCOPE_PIPELINE_HPP
