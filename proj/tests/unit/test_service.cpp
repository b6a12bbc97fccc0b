#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "focuskit/io/pfm.hpp"
#include "focuskit/service/http_service.hpp"
#include "oracles/lidar_oracle.hpp"

using namespace focuskit;
using namespace focuskit::service;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("focuskit_service_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PointCloud fixture() {
  auto c = oracle::random_cloud(3000, Vec3(-2, -1.5, 0.5), Vec3(2, 1.5, 4), 11);
  c.frame = "camera";
  // PLY stores float32; keep the fixture exactly representable.
  for (auto& p : c.points) p = p.cast<float>().cast<double>();
  c.intensity.assign(c.size(), 0.5f);
  return c;
}

Edit triangle_edit() {
  Edit e;
  e.polygon = {{10, 5}, {55, 20}, {20, 44}};
  e.depth_range = {1.9, 2.1};
  e.view.intrinsics = {30.0, 30.0, 32.0, 24.0};
  return e;
}

std::vector<Vec3> brute_triangle_removal(const PointCloud& c) {
  const std::vector<std::pair<double, double>> tri{{10, 5}, {55, 20}, {20, 44}};
  std::vector<Vec3> keep;
  for (const auto& p : c.points) {
    const bool hit = p.z() >= 1.9 && p.z() <= 2.1 &&
                     oracle::inside_simple_polygon(tri, 30 * p.x() / p.z() + 32, 30 * p.y() / p.z() + 24);
    if (!hit) keep.push_back(p);
  }
  return keep;
}

}  // namespace

TEST(Session, EditMatchesBruteForce) {
  const auto cloud = fixture();
  CleanupSession s(cloud);
  const auto removed = s.apply_edit(triangle_edit());
  const auto want = brute_triangle_removal(cloud);
  EXPECT_EQ(removed, cloud.size() - want.size());
  EXPECT_GT(removed, 0u);
  EXPECT_EQ(s.snapshot()->points, want);
}

TEST(Session, FullFrameRemovesAll) {
  CleanupSession s(fixture());
  Edit e;
  e.polygon = {{-1e9, -1e9}, {1e9, -1e9}, {1e9, 1e9}, {-1e9, 1e9}};
  e.view.intrinsics = {30.0, 30.0, 32.0, 24.0};
  EXPECT_EQ(s.apply_edit(e), 3000u);
  EXPECT_TRUE(s.snapshot()->empty());
}

TEST(Session, UndoRestoresAndSaveIsByteIdentical) {
  const auto cloud = fixture();
  const auto dir = scratch("undo");
  CleanupSession s(cloud);
  EXPECT_THROW(s.undo(), SessionStateError);
  s.apply_edit(triangle_edit());
  s.apply_edit(triangle_edit());  // idempotent on an already cleaned cloud
  EXPECT_EQ(s.info().edits, 2u);
  s.undo();
  s.undo();
  EXPECT_EQ(*s.snapshot(), cloud);
  s.save(dir, "restored");
  EXPECT_EQ(io::read_file(dir / "restored.ply"), io::encode_ply(cloud));
  EXPECT_FALSE(s.info().dirty);
}

TEST(Session, SaveWritesCloudAndEditLog) {
  const auto dir = scratch("save");
  CleanupSession s(fixture());
  s.apply_edit(triangle_edit());
  const auto [ply, log] = s.save(dir);
  EXPECT_EQ(io::read_ply(ply), *s.snapshot());
  const auto j = io::read_json(log);
  ASSERT_EQ(j.at("edits").size(), 1u);
  const auto e = edit_from_json(j.at("edits")[0]);
  EXPECT_EQ(CleanupSession::replay(*s.original(), {e}), *s.snapshot());
}

TEST(Session, JournalRecordsEveryMutation) {
  const auto dir = scratch("journal");
  {
    CleanupSession s(fixture(), dir / "j.log");
    s.apply_edit(triangle_edit());
    s.undo();
    s.save(dir);
  }
  std::ifstream in(dir / "j.log");
  std::vector<std::string> ops;
  for (std::string line; std::getline(in, line);) ops.push_back(io::json::parse(line).at("op"));
  EXPECT_EQ(ops, (std::vector<std::string>{"edit", "undo", "save"}));
}

TEST(Session, EditJsonValidation) {
  EXPECT_THROW(edit_from_json({{"polygon", {{0, 0}, {1, 1}}}}), std::invalid_argument);
  EXPECT_THROW(edit_from_json({{"polygon", {{0, 0}, {1, 1}, {0, 1}}}, {"depth_range", {3.0, 2.0}}}),
               std::invalid_argument);
  const auto e = edit_from_json({{"polygon", {{0, 0}, {1, 1}, {0, 1}}}, {"depth_range", {1.0, nullptr}}});
  EXPECT_TRUE(std::isinf(e.depth_range.z_max));
  const auto round = edit_from_json(to_json(triangle_edit()));
  EXPECT_EQ(to_json(round), to_json(triangle_edit()));
}

TEST(Decimate, StrideAndCap) {
  const auto c = fixture();
  EXPECT_EQ(decimate(c, 0).size(), 3000u);
  EXPECT_LE(decimate(c, 700).size(), 700u);
  EXPECT_EQ(decimate(c, 1000).size(), 1000u);
}

TEST(ParsePose, Validates) {
  const auto t = parse_pose("1,0,0,1, 0,1,0,2, 0,0,1,3, 0,0,0,1");
  EXPECT_EQ(t.translation, Vec3(1, 2, 3));
  EXPECT_THROW(parse_pose("1,0,0"), std::invalid_argument);
  EXPECT_THROW(parse_pose("2,0,0,0,0,1,0,0,0,0,1,0,0,0,0,1"), std::invalid_argument);
}

class HttpFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scratch(::testing::UnitTest::GetInstance()->current_test_info()->name());
    cloud_ = fixture();
    session_ = std::make_unique<CleanupSession>(cloud_);
    server_ = std::make_unique<CleanupServer>(*session_, dir_);
    port_ = server_->bind_any();
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  fs::path dir_;
  PointCloud cloud_;
  std::unique_ptr<CleanupSession> session_;
  std::unique_ptr<CleanupServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpFixture, SessionAndCloud) {
  auto r = client_->Get("/session");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto j = io::json::parse(r->body);
  EXPECT_EQ(j.at("points"), 3000);
  EXPECT_EQ(j.at("id"), session_->id());

  r = client_->Get("/cloud");
  ASSERT_TRUE(r);
  EXPECT_EQ(io::decode_ply(r->body), cloud_);
  r = client_->Get("/cloud?max_points=100");
  EXPECT_LE(io::decode_ply(r->body).size(), 100u);
}

TEST_F(HttpFixture, RenderMatchesLibrary) {
  auto r = client_->Get("/render?fx=30&fy=30&cx=32&cy=24&width=64&height=48&splat=1");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto got = io::grid_to_depth(io::decode_pfm(r->body));
  const auto want = project_zbuffer(cloud_, Intrinsics{30, 30, 32, 24}, 64, 48, 1);
  ASSERT_EQ(got.valid_count(), want.valid_count());
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      if (want.valid(x, y)) {
        EXPECT_EQ(got.at(x, y), static_cast<float>(want.at(x, y)));
      }
  EXPECT_EQ(client_->Get("/render?fx=30")->status, 400);
  EXPECT_EQ(client_->Get("/render?fx=0&fy=30&cx=32&cy=24&width=64&height=48")->status, 400);
  EXPECT_EQ(client_->Get("/render?fx=30&fy=30&cx=32&cy=24&width=64&height=48&pose=1,2")->status, 400);
}

TEST_F(HttpFixture, EditUndoSave) {
  const auto body = to_json(triangle_edit()).dump();
  auto r = client_->Post("/edit", body, "application/json");
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto want = brute_triangle_removal(cloud_);
  EXPECT_EQ(io::json::parse(r->body).at("removed"), cloud_.size() - want.size());
  EXPECT_EQ(session_->snapshot()->points, want);

  r = client_->Post("/save", R"({"stem":"after_edit"})", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(io::read_ply(dir_ / "after_edit.ply").points, want);

  EXPECT_EQ(client_->Post("/undo", "", "application/json")->status, 200);
  EXPECT_EQ(client_->Post("/undo", "", "application/json")->status, 409);
  r = client_->Post("/save", "", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(io::read_file(dir_ / "cleaned.ply"), io::encode_ply(cloud_));
}

TEST_F(HttpFixture, BadRequests) {
  EXPECT_EQ(client_->Post("/edit", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client_->Post("/edit", R"({"polygon":[[0,0],[1,1]]})", "application/json")->status, 400);
  EXPECT_EQ(client_->Post("/save", R"({"stem":"../escape"})", "application/json")->status, 400);
  EXPECT_EQ(session_->info().edits, 0u);
}
