#include <tumorscope/phantom.hpp>
#include <tumorscope/service.hpp>

#include "support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace tumorscope;
using nlohmann::json;

namespace {

std::string as_body(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

std::string blob_body() { return as_body(write_nifti(phantom::blob_volume())); }

class ServiceTest : public ::testing::Test {
 protected:
  ReviewService service{phantom::fixture_atlas()};

  std::string open(const std::string& body) {
    const ApiResponse r = service.create_session(body);
    EXPECT_EQ(r.status, 201) << r.body;
    return json::parse(r.body)["session_id"].get<std::string>();
  }
};

}  // namespace

TEST_F(ServiceTest, CreateSessionCountsSlices) {
  const ApiResponse r = service.create_session(as_body(write_nifti(phantom::extent_volume(160))));
  ASSERT_EQ(r.status, 201);
  const auto doc = json::parse(r.body);
  EXPECT_EQ(doc["slices"], 16);
  EXPECT_EQ(doc["session_id"].get<std::string>().size(), 32u);
}

TEST_F(ServiceTest, CreateSessionRejectsBadInput) {
  auto bytes = write_nifti(phantom::blob_volume());
  std::memcpy(bytes.data() + 344, "XXXX", 4);
  const ApiResponse r = service.create_session(as_body(bytes));
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(json::parse(r.body)["code"], "BadMagic");

  ServiceConfig small;
  small.max_upload_bytes = 1000;
  ReviewService capped(phantom::fixture_atlas(), small);
  EXPECT_EQ(capped.create_session(blob_body()).status, 413);
}

TEST_F(ServiceTest, SlicePngDecodesToNormalizedPixels) {
  const std::string id = open(blob_body());
  const ApiResponse r = service.slice_png(id, phantom::kBlobSlice);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const auto img = png::decode_gray(std::span(reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()));
  ASSERT_EQ(img.width, 79);
  ASSERT_EQ(img.height, 95);
  const auto slices = extract_axial_slices(phantom::blob_volume(), 10.0);
  const Slice norm = normalize_intensities(slices[phantom::kBlobSlice]);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    ASSERT_EQ(img.pixels[i], static_cast<std::uint8_t>(std::lround(norm.pixels[i] * 255.0)));
  }
  EXPECT_EQ(service.slice_png(id, phantom::kBlobSlice).body, r.body);
  EXPECT_EQ(service.slice_png(id, 20).status, 404);
  EXPECT_EQ(service.slice_png("deadbeef", 0).status, 404);
}

TEST_F(ServiceTest, SegmentReturnsCandidatesAndCaches) {
  const std::string id = open(blob_body());
  const ApiResponse r = service.segment(id, phantom::kBlobSlice, R"({"seed": 42})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = json::parse(r.body);
  ASSERT_EQ(doc["candidates"].size(), 5u);
  ASSERT_EQ(doc["centroids"].size(), 5u);

  // Exactly one small cluster that also has the largest centroid.
  const auto pixels = doc["pixels"].get<std::vector<std::size_t>>();
  const auto centroids = doc["centroids"].get<std::vector<double>>();
  const double top = *std::max_element(centroids.begin(), centroids.end());
  int matches = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    if (pixels[k] > 0 && pixels[k] <= 0.3 * 79 * 95 && centroids[k] == top) ++matches;
  }
  EXPECT_EQ(matches, 1);

  EXPECT_EQ(service.segment(id, phantom::kBlobSlice, R"({"seed": 42})").body, r.body);

  const std::string key = doc["segmentation"];
  const ApiResponse mask = service.candidate_png(id, phantom::kBlobSlice, key, 0);
  EXPECT_EQ(mask.status, 200);
  EXPECT_EQ(service.candidate_png(id, phantom::kBlobSlice, key, 5).status, 404);
  EXPECT_EQ(service.candidate_png(id, phantom::kBlobSlice, "0000000000000000", 0).status, 404);
}

TEST_F(ServiceTest, SegmentValidatesParams) {
  const std::string id = open(blob_body());
  EXPECT_EQ(service.segment(id, 0, R"({"c": 1})").status, 422);
  EXPECT_EQ(service.segment(id, 0, R"({"m": 1.0})").status, 422);
  EXPECT_EQ(service.segment(id, 0, R"({"c": "five"})").status, 422);
  EXPECT_EQ(service.segment(id, 0, "not json").status, 400);
  EXPECT_EQ(service.segment(id, 99, "{}").status, 404);
  EXPECT_EQ(service.segment(id, 0, "").status, 200);
}

TEST_F(ServiceTest, SelectReportsRightBA4) {
  const std::string id = open(blob_body());
  EXPECT_EQ(service.select(id, phantom::kBlobSlice, R"({"k": 0})").status, 409);

  const auto seg = json::parse(service.segment(id, phantom::kBlobSlice, R"({"seed": 42})").body);
  const auto centroids = seg["centroids"].get<std::vector<double>>();
  const int k = static_cast<int>(std::max_element(centroids.begin(), centroids.end()) - centroids.begin());

  const ApiResponse r = service.select(id, phantom::kBlobSlice, R"({"k": )" + std::to_string(k) + "}");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto doc = json::parse(r.body);
  EXPECT_TRUE(doc["left"].empty());
  ASSERT_EQ(doc["right"].size(), 1u);
  EXPECT_EQ(doc["right"][0]["area"], 4);
  EXPECT_EQ(doc["right"][0]["name"], "Primary motor cortex");
  EXPECT_EQ(doc["right"][0]["pixels"], 144);

  EXPECT_EQ(service.select(id, phantom::kBlobSlice, R"({"k": 5})").status, 422);
  EXPECT_EQ(service.select(id, phantom::kBlobSlice, R"({"k": -1})").status, 422);
  EXPECT_EQ(service.select(id, phantom::kBlobSlice, R"({})").status, 422);
  EXPECT_EQ(service.select(id, phantom::kBlobSlice, R"({"k": )" + std::to_string(k) + "}").body, r.body);
}

TEST_F(ServiceTest, MatchesPipelineReport) {
  const std::string id = open(blob_body());
  PipelineConfig cfg;
  cfg.fcm.seed = 42;
  cfg.selection = SelectionMode::Explicit;
  const auto seg = json::parse(service.segment(id, phantom::kBlobSlice, R"({"seed": 42})").body);
  for (int k = 0; k < 5; ++k) {
    cfg.explicit_selection = {{phantom::kBlobSlice, k}};
    cfg.slices = std::vector<int>{phantom::kBlobSlice};
    const auto run = process(cfg, phantom::blob_volume(), phantom::fixture_atlas());
    const SliceResult& s = run.report.slices[0];
    EXPECT_EQ(seg["centroids"].get<std::vector<double>>(), s.centroids);
    EXPECT_EQ(seg["iterations"], s.iterations);
    const auto doc = json::parse(service.select(id, phantom::kBlobSlice, R"({"k": )" + std::to_string(k) + "}").body);
    EXPECT_EQ(json(ReviewService::report_json(*s.report, seg["segmentation"], k)), doc);
  }
}

TEST_F(ServiceTest, SessionsAreIsolated) {
  const std::string a = open(blob_body());
  const std::string b = open(blob_body());
  ASSERT_NE(a, b);
  const std::string before = service.segment(b, 3, R"({"seed": 1})").body;
  service.segment(a, 3, R"({"seed": 2, "c": 3})");
  service.select(a, 3, R"({"k": 0})");
  EXPECT_EQ(service.segment(b, 3, R"({"seed": 1})").body, before);
  EXPECT_EQ(service.select(b, 3, R"({"k": 4})").status, 200);
}

TEST_F(ServiceTest, ConcurrentSegmentRequestsAgree) {
  const std::string id = open(blob_body());
  std::vector<std::string> bodies(8);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) threads.emplace_back([&, t] { bodies[t] = service.segment(id, 5, R"({"seed": 9})").body; });
  }
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
}

TEST(ServiceTtl, EvictsIdleSessions) {
  ServiceConfig cfg;
  cfg.session_ttl = std::chrono::seconds(60);
  ReviewService service(phantom::fixture_atlas(), cfg);
  ASSERT_EQ(service.create_session(blob_body()).status, 201);
  EXPECT_EQ(service.evict_expired(ReviewService::Clock::now()), 0u);
  EXPECT_EQ(service.session_count(), 1u);
  EXPECT_EQ(service.evict_expired(ReviewService::Clock::now() + std::chrono::seconds(61)), 1u);
  EXPECT_EQ(service.session_count(), 0u);
}

TEST(ServiceHttp, EndToEndOverLoopback) {
  ServiceConfig cfg;
  cfg.max_upload_bytes = 2u << 20;
  ReviewService service(phantom::fixture_atlas(), cfg);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::jthread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/api/v1/sessions", blob_body(), "application/octet-stream");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201);
  const std::string id = json::parse(created->body)["session_id"];
  const std::string base = "/api/v1/sessions/" + id + "/slices/5";

  auto slice = client.Get(base + ".png");
  ASSERT_TRUE(slice);
  EXPECT_EQ(slice->status, 200);
  EXPECT_EQ(slice->get_header_value("Content-Type"), "image/png");

  auto seg = client.Post(base + "/segment", R"({"seed": 42})", "application/json");
  ASSERT_TRUE(seg);
  ASSERT_EQ(seg->status, 200);
  const auto doc = json::parse(seg->body);
  auto mask = client.Get(doc["candidates"][0].get<std::string>());
  ASSERT_TRUE(mask);
  EXPECT_EQ(mask->status, 200);

  const auto centroids = doc["centroids"].get<std::vector<double>>();
  const auto k = std::max_element(centroids.begin(), centroids.end()) - centroids.begin();
  auto sel = client.Post(base + "/select", R"({"k": )" + std::to_string(k) + "}", "application/json");
  ASSERT_TRUE(sel);
  EXPECT_EQ(sel->status, 200);
  EXPECT_EQ(json::parse(sel->body)["right"][0]["area"], 4);

  auto missing = client.Get("/api/v1/sessions/" + id + "/slices/99.png");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["code"], "NotFound");

  auto form = client.Post("/api/v1/sessions", blob_body(), "application/x-www-form-urlencoded");
  ASSERT_TRUE(form);
  EXPECT_EQ(form->status, 201);

  auto big = client.Post("/api/v1/sessions", std::string(3u << 20, 'x'), "application/octet-stream");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);

  server.stop();
}
