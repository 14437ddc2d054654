#include <gtest/gtest.h>

#include <memory>
#include <thread>

#include "test_util.hpp"
#include "trampoline/service.hpp"

using namespace tramp;
using testutil::codes;
namespace fs = std::filesystem;

namespace {

// One extracted routine "r1" (F1F then FTF) with crops and per-jump features.
fs::path template_dir() {
  static testutil::TempDir dir("service_template");
  static bool built = false;
  if (!built) {
    NoiseSpec n;
    n.seed = 8;
    const GeneratedRoutine g = generate_routine(codes({"F1F", "FTF"}), 30, n);
    const testutil::RenderedSource src(g);
    const PipelineConfig cfg;
    const fs::path rdir = dir / "routines" / "r1";
    ExtractOptions opt{"r1", std::nullopt, rdir / "crops"};
    const RoutineExtraction r = extract_routine(src, cfg, opt);
    write_extraction(rdir, r, cfg);
    const auto feats = routine_features(g.poses, r.segments, cfg, "r1");
    for (std::size_t k = 0; k < feats.size(); ++k)
      if (feats[k]) write_json_atomic(rdir / "features" / (std::to_string(k) + ".json"), to_json(*feats[k]));
    built = true;
  }
  return dir.path();
}

class ServiceTest : public ::testing::Test {
protected:
  void SetUp() override {
    fs::copy(template_dir(), data_.path(), fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    service_ = std::make_unique<Service>(data_.path());
    service_->install(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  nlohmann::json get_json(const std::string& path, int want = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    if (!res) return {};
    EXPECT_EQ(res->status, want) << path << " " << res->body;
    return nlohmann::json::parse(res->body);
  }

  httplib::Result post(const std::string& path, const nlohmann::json& body, httplib::Headers h = {}) {
    return client_->Post(path, h, body.dump(), "application/json");
  }

  httplib::Result put_line(int row, httplib::Headers h = {}) {
    return client_->Put("/api/routines/r1/trampoline-line", h, nlohmann::json{{"top_row", row}}.dump(), "application/json");
  }

  std::size_t first_jump() {
    const auto s = get_json("/api/routines/r1/segments");
    for (const auto& e : s["segments"])
      if (e["is_routine_jump"].get<bool>()) return e["index"].get<std::size_t>();
    ADD_FAILURE() << "no routine jump";
    return 0;
  }

  testutil::TempDir data_{"service"};
  std::unique_ptr<Service> service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(ServiceTest, CatalogLists33Skills) {
  const auto j = get_json("/api/catalog");
  ASSERT_TRUE(j.is_array());
  EXPECT_EQ(j.size(), 33u);
  EXPECT_EQ(j[0]["code"], "F0F");
}

TEST_F(ServiceTest, RoutinesAndDetails) {
  const auto list = get_json("/api/routines");
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0]["id"], "r1");
  EXPECT_EQ(list[0]["trampoline_line"]["source"], "detected");
  auto res = client_->Get("/api/routines/r1");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto r = nlohmann::json::parse(res->body);
  EXPECT_EQ(res->get_header_value("ETag"), r["revision"].get<std::string>());
  EXPECT_EQ(r["revision"], list[0]["revision"]);
  EXPECT_TRUE(r["labels"].empty());
  get_json("/api/routines/nope", 404);
  get_json("/api/routines/nope/segments", 404);
}

TEST_F(ServiceTest, SegmentsIncludeContact) {
  const auto s = get_json("/api/routines/r1/segments");
  EXPECT_EQ(s["segments"].size(), 6u);
  EXPECT_EQ(s["contact"].size(), get_json("/api/routines/r1")["frame_count"].get<std::size_t>());
}

TEST_F(ServiceTest, PutLineRecomputesContact) {
  const auto before = get_json("/api/routines/r1/segments");
  const int row = before["trampoline_line"]["top_row"].get<int>() - 60;
  auto res = put_line(row);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto after = nlohmann::json::parse(res->body);
  EXPECT_EQ(after["trampoline_line"]["top_row"], row);
  EXPECT_EQ(after["trampoline_line"]["source"], "user_adjusted");
  EXPECT_NE(after["revision"], before["revision"]);
  std::size_t c0 = 0, c1 = 0;
  for (const auto& c : before["contact"]) c0 += c.get<bool>();
  for (const auto& c : after["contact"]) c1 += c.get<bool>();
  EXPECT_GT(c1, c0);

  RoutineExtraction expect = read_extraction(data_ / "routines/r1");
  expect.line = set_trampoline_line(row);
  derive_segments(expect, PipelineConfig{});
  EXPECT_EQ(after["segments"], segments_json(expect)["segments"]);
  EXPECT_EQ(get_json("/api/routines/r1")["trampoline_line"]["source"], "user_adjusted");
}

TEST_F(ServiceTest, PutLineBackToDetectedRestoresSegments) {
  const auto before = get_json("/api/routines/r1/segments");
  const int row = before["trampoline_line"]["top_row"].get<int>();
  ASSERT_EQ(put_line(row - 40)->status, 200);
  const auto res = put_line(row);
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(nlohmann::json::parse(res->body)["segments"], before["segments"]);
}

TEST_F(ServiceTest, StaleRevisionIsAConflict) {
  const std::string rev = get_json("/api/routines/r1")["revision"];
  auto ok = put_line(300, {{"If-Match", rev}});
  ASSERT_EQ(ok->status, 200) << ok->body;
  auto stale = put_line(310, {{"If-Match", rev}});
  EXPECT_EQ(stale->status, 409);
  auto label = post("/api/segments/r1:3/label", {{"code", "FTF"}}, {{"If-Match", rev}});
  EXPECT_EQ(label->status, 409);
}

TEST_F(ServiceTest, BadLineRequests) {
  EXPECT_EQ(client_->Put("/api/routines/r1/trampoline-line", "{}", "application/json")->status, 400);
  EXPECT_EQ(client_->Put("/api/routines/r1/trampoline-line", "nope", "application/json")->status, 400);
  EXPECT_EQ(put_line(5000)->status, 400);
  EXPECT_EQ(put_line(-1)->status, 400);
  EXPECT_EQ(client_->Put("/api/routines/zz/trampoline-line", R"({"top_row": 3})", "application/json")->status, 404);
}

TEST_F(ServiceTest, LabelValidation) {
  const std::size_t k = first_jump();
  const std::string path = "/api/segments/r1:" + std::to_string(k) + "/label";
  EXPECT_EQ(post(path, {{"code", "ZZZ"}})->status, 422);
  EXPECT_EQ(post(path, nlohmann::json::object())->status, 422);
  EXPECT_EQ(post("/api/segments/r1:99/label", {{"code", "FTF"}})->status, 404);
  EXPECT_EQ(post("/api/segments/zz:0/label", {{"code", "FTF"}})->status, 404);
  auto ok = post(path, {{"code", "FTF"}});
  ASSERT_EQ(ok->status, 200) << ok->body;
  EXPECT_TRUE(nlohmann::json::parse(ok->body)["reference_entry"].is_null());
  EXPECT_EQ(get_json("/api/routines/r1")["labels"][std::to_string(k)], "FTF");
}

TEST_F(ServiceTest, LabelAddsReferenceAndClassifyUsesIt) {
  const std::size_t k = first_jump();
  const std::string seg = "/api/segments/r1:" + std::to_string(k);
  EXPECT_EQ(post(seg + "/classify", nlohmann::json::object())->status, 409);

  auto res = post(seg + "/label", {{"code", "FTF"}, {"add_to_reference_set", true}, {"athlete_id", "a7"}});
  ASSERT_EQ(res->status, 200) << res->body;
  const auto body = nlohmann::json::parse(res->body);
  EXPECT_EQ(body["reference_entry"], "ref-0001");

  const auto refs = get_json("/api/reference-set");
  ASSERT_EQ(refs["entries"].size(), 1u);
  EXPECT_EQ(refs["entries"][0]["code"], "FTF");
  EXPECT_EQ(refs["entries"][0]["provenance"]["routine_id"], "r1");
  EXPECT_EQ(refs["entries"][0]["provenance"]["athlete_id"], "a7");
  EXPECT_EQ(refs["revision"], body["reference_set_revision"]);

  auto cls = post(seg + "/classify", nlohmann::json::object());
  ASSERT_EQ(cls->status, 200) << cls->body;
  const auto c = nlohmann::json::parse(cls->body);
  EXPECT_EQ(c["best"], "FTF");
  EXPECT_EQ(c["segment"], "r1:" + std::to_string(k));
  EXPECT_EQ(post("/api/segments/r1:0/classify", nlohmann::json::object())->status, 404);
}

TEST_F(ServiceTest, ReferenceSetRevisionGuardsLabelAdds) {
  const std::size_t k = first_jump();
  const std::string path = "/api/segments/r1:" + std::to_string(k) + "/label";
  const std::string rev = get_json("/api/reference-set")["revision"];
  nlohmann::json add{{"code", "FTF"}, {"add_to_reference_set", true}};
  ASSERT_EQ(post(path, add, {{"If-Match-Reference-Set", rev}})->status, 200);
  EXPECT_EQ(post(path, add, {{"If-Match-Reference-Set", rev}})->status, 409);
}

TEST_F(ServiceTest, DeleteReferenceEntry) {
  const std::size_t k = first_jump();
  ASSERT_EQ(post("/api/segments/r1:" + std::to_string(k) + "/label", {{"code", "FTF"}, {"add_to_reference_set", true}})->status,
            200);
  EXPECT_EQ(client_->Delete("/api/reference-set/ref-0009")->status, 404);
  const std::string rev = get_json("/api/reference-set")["revision"];
  EXPECT_EQ(client_->Delete("/api/reference-set/ref-0001", {{"If-Match", "\"0000\""}})->status, 409);
  auto del = client_->Delete("/api/reference-set/ref-0001", {{"If-Match", rev}});
  ASSERT_EQ(del->status, 200) << del->body;
  EXPECT_TRUE(get_json("/api/reference-set")["entries"].empty());
  EXPECT_EQ(client_->Delete("/api/reference-set/ref-0001")->status, 404);
}

TEST_F(ServiceTest, EvaluationLatest) {
  get_json("/api/evaluation/latest", 404);
  write_json_atomic(data_ / "evaluation/report.json", {{"mean_accuracy", 0.9}});
  EXPECT_EQ(get_json("/api/evaluation/latest")["mean_accuracy"], 0.9);
}

TEST_F(ServiceTest, FramesAndMeta) {
  const auto origins = read_json_file(data_ / "routines/r1/crops/origins.json");
  ASSERT_FALSE(origins.empty());
  const std::string n = origins.begin().key();
  auto png = client_->Get("/api/routines/r1/frames/" + n);
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(png->body.substr(1, 3), "PNG");
  const auto meta = get_json("/api/routines/r1/frames/" + n + "/meta");
  EXPECT_EQ(meta["origin"], origins[n]);
  EXPECT_FALSE(meta["contact"].get<bool>());
  EXPECT_FALSE(meta["observation"].is_null());
  const auto m0 = get_json("/api/routines/r1/frames/0/meta");
  EXPECT_TRUE(m0["contact"].get<bool>());
  EXPECT_TRUE(m0["origin"].is_null());
  EXPECT_EQ(client_->Get("/api/routines/r1/frames/0")->status, 404);
  get_json("/api/routines/r1/frames/99999/meta", 404);
}

TEST_F(ServiceTest, ConcurrentReadersAndWriter) {
  std::vector<std::thread> readers;
  std::atomic<int> bad{0};
  for (int t = 0; t < 4; ++t)
    readers.emplace_back([&] {
      httplib::Client c("127.0.0.1", port_);
      for (int i = 0; i < 10; ++i) {
        auto r = c.Get("/api/routines/r1/segments");
        if (!r || r->status != 200) {
          ++bad;
          continue;
        }
        const auto j = nlohmann::json::parse(r->body, nullptr, false);
        if (j.is_discarded() || !j.contains("segments")) ++bad;
      }
    });
  const int row = get_json("/api/routines/r1")["trampoline_line"]["top_row"].get<int>();
  for (int i = 0; i < 5; ++i) EXPECT_EQ(put_line(row - 10 * (i % 2))->status, 200);
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0);
}
