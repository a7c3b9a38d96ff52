#include <gtest/gtest.h>

#include <future>
#include <thread>

#include "../support/temp_dir.hpp"
#include "foodfuse/png.hpp"
#include "foodfuse/serve.hpp"
#include "foodfuse/synthetic.hpp"
#include "httplib.h"

namespace foodfuse {
namespace {

namespace fs = std::filesystem;

class ServeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    synthetic::write_corpus(data_.str(), 2);
    ServeOptions o;
    o.data_root = data_.str();
    service_ = std::make_unique<SceneService>(o);
  }

  testing::TempDir data_;
  std::unique_ptr<SceneService> service_;
};

TEST_F(ServeTest, ListScenesSortedWithDims) {
  const auto r = service_->list_scenes();
  EXPECT_EQ(r.status, 200);
  const auto j = Json::parse(r.body);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["id"], "scene_00");
  EXPECT_EQ(j[1]["id"], "scene_01");
  EXPECT_EQ(j[0]["width"], 64);
}

TEST(ServeEmpty, EmptyRootListsNothing) {
  testing::TempDir tmp;
  synthetic::write_corpus(tmp.str(), 0);
  ServeOptions o;
  o.data_root = tmp.str();
  SceneService s(o);
  EXPECT_EQ(s.list_scenes().body, "[]");
}

TEST_F(ServeTest, SemanticLayerIsVerbatim) {
  const auto r = service_->layer("scene_00", "semantic");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/png");
  const auto bytes = png::read_file((data_.path() / "scene_00" / "semantic.png").string());
  EXPECT_EQ(r.body, std::string(bytes.begin(), bytes.end()));
}

TEST_F(ServeTest, EnhancedLayerCachedAndCorrect) {
  const auto a = service_->layer("scene_01", "enhanced");
  const auto b = service_->layer("scene_01", "enhanced");
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  const std::vector<std::uint8_t> bytes(a.body.begin(), a.body.end());
  EXPECT_EQ(decode_label_map(bytes), synthetic::make_plate_scene(1).ground_truth);
  EXPECT_EQ(service_->layer("scene_01", "panoptic", "color").status, 200);
}

TEST_F(ServeTest, ErrorsMapToStatus) {
  EXPECT_EQ(service_->layer("nope", "semantic").status, 404);
  EXPECT_EQ(service_->layer("scene_00", "depth").status, 400);
  EXPECT_EQ(service_->prompt("nope", R"({"kind":"regular"})").status, 404);
  EXPECT_EQ(service_->prompt("scene_00", "{not json").status, 400);
  EXPECT_EQ(service_->prompt("scene_00", R"({"kind":"point","geometry":[64,2]})").status, 400);
  EXPECT_EQ(service_->prompt("scene_00", R"({"kind":"point","geometry":[1]})").status, 400);
  EXPECT_EQ(service_->prompt("scene_00", R"({"kind":"point","geometry":[1,1],"params":{"tau":3}})").status, 400);
}

TEST_F(ServeTest, PointOnFoodGivesOneSegment) {
  const auto r = service_->prompt("scene_00", R"({"kind":"point","geometry":[40.5,40.5]})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = Json::parse(r.body);
  ASSERT_EQ(j["segments"].size(), 1u);
  EXPECT_EQ(j["segments"][0]["category_name"], "egg");
  EXPECT_EQ(j["segments"][0]["color"].size(), 3u);
}

TEST_F(ServeTest, RegularGivesAllSegments) {
  const auto r = service_->prompt("scene_00", R"({"kind":"regular"})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(Json::parse(r.body)["segments"].size(), 6u);
}

TEST_F(ServeTest, PerRequestParamsDoNotPoisonDefaults) {
  const auto before = service_->layer("scene_00", "enhanced").body;
  const auto r = service_->prompt("scene_00", R"({"kind":"regular","params":{"tau":0.9}})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(service_->layer("scene_00", "enhanced").body, before);
}

TEST_F(ServeTest, ConcurrentIdenticalPromptsAgree) {
  const std::string body = R"({"kind":"box","geometry":[10,10,50,50],"params":{"tau":0.3}})";
  std::vector<std::future<HttpResponse>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&] { return service_->prompt("scene_01", body); }));
  }
  const auto first = futures[0].get();
  ASSERT_EQ(first.status, 200);
  for (std::size_t i = 1; i < futures.size(); ++i) EXPECT_EQ(futures[i].get().body, first.body);
}

TEST_F(ServeTest, HttpEndToEnd) {
  HttpServer server(*service_);
  std::promise<int> port;
  std::thread t([&] { server.listen("127.0.0.1", 0, [&](int p) { port.set_value(p); }); });
  const int p = port.get_future().get();
  httplib::Client client("127.0.0.1", p);

  auto res = client.Get("/scenes");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  res = client.Get("/scenes/scene_00/layers?layer=instance");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");

  res = client.Get("/scenes/missing/layers?layer=semantic");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  res = client.Post("/scenes/scene_00/prompt", R"({"kind":"point","geometry":[12.5,40.5]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto j = Json::parse(res->body);
  ASSERT_EQ(j["segments"].size(), 1u);
  EXPECT_EQ(j["segments"][0]["category_name"], "plate");
  EXPECT_EQ(count_foreground(rle_from_json(j["segments"][0]["rle"])), j["segments"][0]["area"].get<int>());

  res = client.Post("/scenes/scene_00/prompt", R"({"kind":"point","geometry":[-3,0]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  server.stop();
  t.join();
}

}  // namespace
}  // namespace foodfuse
