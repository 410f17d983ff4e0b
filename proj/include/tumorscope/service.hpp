#ifndef TUMORSCOPE_SERVICE_HPP
#define TUMORSCOPE_SERVICE_HPP

// HTTP/JSON review service: upload a volume, browse slices, segment one,
// choose the tumor cluster, read the per-hemisphere Brodmann report.
//
//   POST /api/v1/sessions                                   body: NIfTI-1 bytes
//   GET  /api/v1/sessions/{id}/slices/{i}.png
//   POST /api/v1/sessions/{id}/slices/{i}/segment           {c, m, epsilon, max_iter, seed}
//   GET  /api/v1/sessions/{id}/slices/{i}/segmentations/{key}/candidates/{k}.png
//   POST /api/v1/sessions/{id}/slices/{i}/select            {k}
//
// Errors are {code, message}. Every handler is also callable directly, which
// is how the transport-free tests drive it.

#include <tumorscope/atlas.hpp>
#include <tumorscope/error.hpp>
#include <tumorscope/fcm.hpp>
#include <tumorscope/nifti.hpp>
#include <tumorscope/pipeline.hpp>
#include <tumorscope/png.hpp>

// Uploads are raw bytes whatever Content-Type the client sends; the size
// limit is set_payload_max_length, not httplib's form-body cap.
#ifndef CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (std::size_t{1} << 40)
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tumorscope {

struct ServiceConfig {
  double gap_mm = 10.0;
  std::size_t max_upload_bytes = std::size_t{256} << 20;
  std::chrono::seconds session_ttl{3600};
  std::size_t min_overlap_pixels = 1;
  std::filesystem::path webui_dir;  // served at "/" when non-empty
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

inline ApiResponse json_response(int status, const nlohmann::ordered_json& doc) {
  return {status, "application/json", doc.dump() + "\n"};
}

inline ApiResponse error_response(int status, std::string_view code, std::string_view message) {
  nlohmann::ordered_json doc;
  doc["code"] = code;
  doc["message"] = message;
  return json_response(status, doc);
}

inline ApiResponse error_response(int status, const Error& e) {
  return error_response(status, to_string(e.code()), e.detail());
}

}  // namespace detail

/// Cache key for a parameter set: stable hex digest of its canonical JSON.
inline std::string params_key(const FcmParams& p) { return detail::hex64(detail::fnv1a(detail::params_json(p).dump())); }

class ReviewService {
 public:
  using Clock = std::chrono::steady_clock;

  ReviewService(Atlas atlas, ServiceConfig cfg = {}) : atlas_(std::move(atlas)), cfg_(std::move(cfg)) {}

  const ServiceConfig& config() const noexcept { return cfg_; }

  ApiResponse create_session(std::string_view body) {
    sweep();
    if (body.size() > cfg_.max_upload_bytes) {
      return detail::error_response(413, "PayloadTooLarge", "upload exceeds " + std::to_string(cfg_.max_upload_bytes) + " bytes");
    }
    auto session = std::make_shared<Session>();
    try {
      const Volume volume = parse_nifti(
          std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
      session->raw_slices = extract_axial_slices(volume, cfg_.gap_mm);
    } catch (const Error& e) {
      return detail::error_response(400, e);
    }
    for (const Slice& s : session->raw_slices) session->slice_pngs.push_back(render_slice(s));
    session->last_access = Clock::now();

    std::string id = new_session_id();
    {
      std::unique_lock lock(sessions_mu_);
      while (sessions_.contains(id)) id = new_session_id();
      session->id = id;
      sessions_.emplace(id, session);
    }
    nlohmann::ordered_json doc;
    doc["session_id"] = id;
    doc["slices"] = session->raw_slices.size();
    doc["width"] = kAtlasWidth;
    doc["height"] = kAtlasHeight;
    return detail::json_response(201, doc);
  }

  ApiResponse slice_png(const std::string& id, long long index) {
    sweep();
    const auto session = find(id);
    if (!session) return unknown_session(id);
    if (index < 0 || index >= static_cast<long long>(session->slice_pngs.size())) return unknown_slice(index);
    return {200, "image/png", session->slice_pngs[static_cast<std::size_t>(index)]};
  }

  ApiResponse segment(const std::string& id, long long index, std::string_view body) {
    sweep();
    const auto session = find(id);
    if (!session) return unknown_session(id);
    if (index < 0 || index >= static_cast<long long>(session->raw_slices.size())) return unknown_slice(index);

    FcmParams params;
    if (auto bad = parse_params(body, params)) return *bad;
    const int slice = static_cast<int>(index);
    const std::string key = params_key(params);

    std::shared_future<std::shared_ptr<const Segmentation>> pending;
    std::optional<std::promise<std::shared_ptr<const Segmentation>>> owner;
    {
      std::lock_guard lock(session->mu);
      auto& slot = session->segmentations[{slice, key}];
      if (!slot.valid()) {
        owner.emplace();
        slot = owner->get_future().share();
      }
      pending = slot;
    }
    if (owner) {
      try {
        owner->set_value(compute_segmentation(*session, slice, key, params));
      } catch (...) {
        owner->set_exception(std::current_exception());
        std::lock_guard lock(session->mu);
        session->segmentations.erase({slice, key});
      }
    }
    try {
      const auto seg = pending.get();
      std::lock_guard lock(session->mu);
      session->latest[slice] = key;
      return {200, "application/json", seg->response};
    } catch (const Error& e) {
      return detail::error_response(422, e);
    }
  }

  ApiResponse candidate_png(const std::string& id, long long index, const std::string& key, long long k) {
    sweep();
    const auto session = find(id);
    if (!session) return unknown_session(id);
    const auto seg = ready_segmentation(*session, index, key);
    if (!seg) return detail::error_response(404, "NotFound", "no segmentation " + key + " for slice " + std::to_string(index));
    if (k < 0 || k >= static_cast<long long>(seg->mask_pngs.size())) {
      return detail::error_response(404, "NotFound", "no candidate " + std::to_string(k));
    }
    return {200, "image/png", seg->mask_pngs[static_cast<std::size_t>(k)]};
  }

  ApiResponse select(const std::string& id, long long index, std::string_view body) {
    sweep();
    const auto session = find(id);
    if (!session) return unknown_session(id);
    if (index < 0 || index >= static_cast<long long>(session->raw_slices.size())) return unknown_slice(index);
    const int slice = static_cast<int>(index);

    std::string key;
    {
      std::lock_guard lock(session->mu);
      const auto it = session->latest.find(slice);
      if (it != session->latest.end()) key = it->second;
    }
    const auto seg = key.empty() ? nullptr : ready_segmentation(*session, index, key);
    if (!seg) return detail::error_response(409, "NotSegmented", "segment slice " + std::to_string(slice) + " first");

    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("k") || !doc["k"].is_number_integer()) {
      return detail::error_response(422, "BadParams", "body must be {\"k\": <cluster index>}");
    }
    const auto k = doc["k"].get<long long>();
    if (k < 0 || k >= seg->params.c) {
      return detail::error_response(422, "BadIndex", "k must lie in [0, " + std::to_string(seg->params.c) + ")");
    }
    const OverlapReport report =
        overlap_detect(seg->masks[static_cast<std::size_t>(k)], atlas_, slice, cfg_.min_overlap_pixels);
    {
      std::lock_guard lock(session->mu);
      session->selected[slice] = static_cast<int>(k);
    }
    return detail::json_response(200, report_json(report, key, static_cast<int>(k)));
  }

  /// Drops sessions idle for longer than the TTL. Returns how many.
  std::size_t evict_expired(Clock::time_point now) {
    std::unique_lock lock(sessions_mu_);
    std::size_t dropped = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->touched() > cfg_.session_ttl) {
        it = sessions_.erase(it);
        ++dropped;
      } else {
        ++it;
      }
    }
    return dropped;
  }

  std::size_t session_count() const {
    std::shared_lock lock(sessions_mu_);
    return sessions_.size();
  }

  /// Registers routes (and static webui hosting) on `server`.
  void mount(httplib::Server& server) {
    server.set_payload_max_length(cfg_.max_upload_bytes);
    const auto send = [](httplib::Response& res, const ApiResponse& api) {
      res.status = api.status;
      res.set_content(api.body, api.content_type);
    };
    const auto number = [](const std::string& s) -> long long {
      try {
        return std::stoll(s);
      } catch (...) {
        return -1;
      }
    };

    server.Post("/api/v1/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, create_session(req.body));
    });
    server.Get(R"(/api/v1/sessions/([0-9a-f]+)/slices/(\d+)\.png)",
               [this, send, number](const httplib::Request& req, httplib::Response& res) {
                 send(res, slice_png(req.matches[1], number(req.matches[2])));
               });
    server.Post(R"(/api/v1/sessions/([0-9a-f]+)/slices/(\d+)/segment)",
                [this, send, number](const httplib::Request& req, httplib::Response& res) {
                  send(res, segment(req.matches[1], number(req.matches[2]), req.body));
                });
    server.Get(R"(/api/v1/sessions/([0-9a-f]+)/slices/(\d+)/segmentations/([0-9a-f]+)/candidates/(\d+)\.png)",
               [this, send, number](const httplib::Request& req, httplib::Response& res) {
                 send(res, candidate_png(req.matches[1], number(req.matches[2]), req.matches[3], number(req.matches[4])));
               });
    server.Post(R"(/api/v1/sessions/([0-9a-f]+)/slices/(\d+)/select)",
                [this, send, number](const httplib::Request& req, httplib::Response& res) {
                  send(res, select(req.matches[1], number(req.matches[2]), req.body));
                });

    if (!cfg_.webui_dir.empty()) server.set_mount_point("/", cfg_.webui_dir.string());

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const std::string_view code = res.status == 413 ? "PayloadTooLarge" : res.status == 404 ? "NotFound" : "HttpError";
      const ApiResponse api = detail::error_response(res.status, code, httplib::status_message(res.status));
      res.set_content(api.body, api.content_type);
    });
  }

  static std::string base_path(const std::string& id, int slice) {
    return "/api/v1/sessions/" + id + "/slices/" + std::to_string(slice);
  }

  /// Hemisphere-split JSON body for a report.
  static nlohmann::ordered_json report_json(const OverlapReport& report, const std::string& key, int k) {
    nlohmann::ordered_json doc;
    doc["slice"] = report.slice_index;
    doc["segmentation"] = key;
    doc["k"] = k;
    doc["left"] = nlohmann::ordered_json::array();
    doc["right"] = nlohmann::ordered_json::array();
    for (const OverlapHit& h : report.hits) {
      nlohmann::ordered_json hit;
      hit["area"] = h.area_id;
      hit["name"] = h.anatomical_name;
      hit["pixels"] = h.overlap_pixels;
      hit["fraction"] = h.overlap_fraction;
      doc[h.hemisphere == Hemisphere::Left ? "left" : "right"].push_back(std::move(hit));
    }
    return doc;
  }

 private:
  struct Segmentation {
    FcmParams params;
    std::vector<BinaryMask> masks;
    std::vector<std::string> mask_pngs;
    std::string response;
  };

  struct Session {
    std::string id;
    // Immutable after creation.
    std::vector<Slice> raw_slices;
    std::vector<std::string> slice_pngs;

    mutable std::mutex mu;
    Clock::time_point last_access;
    std::map<std::pair<int, std::string>, std::shared_future<std::shared_ptr<const Segmentation>>> segmentations;
    std::map<int, std::string> latest;  // slice -> most recent segmentation key
    std::map<int, int> selected;

    Clock::time_point touched() const {
      std::lock_guard lock(mu);
      return last_access;
    }
  };

  static std::string render_slice(const Slice& raw) {
    const Slice s = resample_to_grid(normalize_intensities(raw), kAtlasWidth, kAtlasHeight);
    png::GrayImage img{s.width, s.height, std::vector<std::uint8_t>(s.pixels.size())};
    for (std::size_t i = 0; i < s.pixels.size(); ++i) img.pixels[i] = png::quantize_unit(s.pixels[i]);
    const auto bytes = png::encode_gray(img);
    return {bytes.begin(), bytes.end()};
  }

  std::shared_ptr<const Segmentation> compute_segmentation(const Session& session, int slice, const std::string& key,
                                                           const FcmParams& params) const {
    SliceSegmentation seg = segment_slice(session.raw_slices[static_cast<std::size_t>(slice)], params);
    auto out = std::make_shared<Segmentation>();
    out->params = params;
    nlohmann::ordered_json doc;
    doc["slice"] = slice;
    doc["segmentation"] = key;
    doc["params"] = detail::params_json(params);
    doc["candidates"] = nlohmann::ordered_json::array();
    doc["pixels"] = nlohmann::ordered_json::array();
    for (int k = 0; k < params.c; ++k) {
      const auto bytes = png::encode_mask(seg.masks[static_cast<std::size_t>(k)]);
      out->mask_pngs.emplace_back(bytes.begin(), bytes.end());
      doc["candidates"].push_back(base_path(session.id, slice) + "/segmentations/" + key + "/candidates/" +
                                  std::to_string(k) + ".png");
      doc["pixels"].push_back(seg.masks[static_cast<std::size_t>(k)].count());
    }
    doc["centroids"] = seg.model.centroids;
    doc["iterations"] = seg.model.iterations;
    doc["converged"] = seg.model.converged;
    out->response = doc.dump() + "\n";
    out->masks = std::move(seg.masks);
    return out;
  }

  std::shared_ptr<const Segmentation> ready_segmentation(Session& session, long long index, const std::string& key) {
    std::shared_future<std::shared_ptr<const Segmentation>> f;
    {
      std::lock_guard lock(session.mu);
      const auto it = session.segmentations.find({static_cast<int>(index), key});
      if (it == session.segmentations.end()) return nullptr;
      f = it->second;
    }
    if (f.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return nullptr;
    try {
      return f.get();
    } catch (...) {
      return nullptr;
    }
  }

  static std::optional<ApiResponse> parse_params(std::string_view body, FcmParams& p) {
    if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) body = "{}";
    const auto doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      return detail::error_response(400, "BadRequest", "segment body must be a JSON object");
    }
    try {
      if (doc.contains("c")) p.c = doc["c"].get<int>();
      if (doc.contains("m")) p.m = doc["m"].get<double>();
      if (doc.contains("epsilon")) p.epsilon = doc["epsilon"].get<double>();
      if (doc.contains("max_iter")) p.max_iter = doc["max_iter"].get<int>();
      if (doc.contains("seed")) p.seed = doc["seed"].get<std::uint64_t>();
      p.validate();
      if (static_cast<long long>(p.c) > static_cast<long long>(kAtlasWidth) * kAtlasHeight) {
        throw Error(Errc::TooFewPoints, "c exceeds the pixel count");
      }
    } catch (const nlohmann::json::exception& e) {
      return detail::error_response(422, "BadParams", e.what());
    } catch (const Error& e) {
      return detail::error_response(422, e);
    }
    return std::nullopt;
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::shared_lock lock(sessions_mu_);
      const auto it = sessions_.find(id);
      if (it == sessions_.end()) return nullptr;
      s = it->second;
    }
    std::lock_guard lock(s->mu);
    s->last_access = Clock::now();
    return s;
  }

  void sweep() { evict_expired(Clock::now()); }

  static ApiResponse unknown_session(const std::string& id) {
    return detail::error_response(404, "NotFound", "no session " + id);
  }
  static ApiResponse unknown_slice(long long index) {
    return detail::error_response(404, "NotFound", "no slice " + std::to_string(index));
  }

  std::string new_session_id() {
    std::lock_guard lock(rng_mu_);
    return detail::hex64(rng_()) + detail::hex64(rng_());
  }

  Atlas atlas_;
  ServiceConfig cfg_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace tumorscope

#endif  // TUMORSCOPE_SERVICE_HPP
