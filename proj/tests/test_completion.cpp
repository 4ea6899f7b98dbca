#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "oracles.hpp"

using namespace mmrecon;
namespace fs = std::filesystem;

namespace {

OrientedPointCloud hemisphere(std::size_t n, std::uint64_t seed) {
  auto s = oracle::unit_sphere(2 * n, seed);
  std::vector<bool> keep(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) keep[i] = s.points[i].z() >= 0.0;
  return s.filtered(keep);
}

enum class Reply { Echo, Empty, Error };

// stand-in for the remote completer: answers every request in the directory
class FakeRemote {
 public:
  FakeRemote(fs::path dir, Reply mode) : dir_(std::move(dir)), mode_(mode), worker_([this] { loop(); }) {}
  ~FakeRemote() {
    stop_ = true;
    worker_.join();
  }
  int served() const { return served_; }

 private:
  void loop() {
    while (!stop_) {
      std::error_code ec;
      for (const auto& entry : fs::directory_iterator(dir_, ec)) {
        const std::string name = entry.path().filename().string();
        if (!name.ends_with(".req.json")) continue;
        const std::string id = name.substr(0, name.size() - 9);
        const auto req = read_cloud_ply(dir_ / (id + ".req.ply"));
        fs::remove(dir_ / (id + ".req.ply"));
        fs::remove(entry.path());
        if (mode_ == Reply::Error) {
          publish_file(dir_ / (id + ".err.json"), nlohmann::json{{"id", id}, {"message", "model crashed"}}.dump());
        } else {
          const OrientedPointCloud reply = mode_ == Reply::Echo ? farthest_point_sample(req, kCompletionPoints) : OrientedPointCloud{};
          publish_file(dir_ / (id + ".resp.ply"), encode_cloud_ply(reply));
        }
        ++served_;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  fs::path dir_;
  Reply mode_;
  std::atomic<bool> stop_{false};
  std::atomic<int> served_{0};
  std::thread worker_;
};

ExchangeEndpoint quick(const fs::path& dir, int timeout_ms = 20000) {
  return {dir, std::chrono::milliseconds(timeout_ms), std::chrono::milliseconds(10)};
}

CandidateSet one_candidate(const OrientedPointCloud& pc) {
  CandidateSet set;
  set.partials = {pc};
  set.iso_values = {0.0};
  return set;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;  // sentinel, never expected
}

}  // namespace

TEST(CompleteAll, IdentityCompleterRoundTripsThroughNormalization) {
  auto pc = oracle::unit_sphere(300, 4, 0.07);
  for (auto& p : pc.points) p += Vec3(0.3, -0.1, 0.05);
  const Completer identity{"identity", [](const CompletionRequest& r) { return r.partial; }, true};
  const auto out = complete_all(one_candidate(pc), identity);
  ASSERT_EQ(out.size(), 1u);
  ASSERT_EQ(out[0].reconstruction.size(), pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_LT((out[0].reconstruction.points[i] - pc.points[i]).norm(), 1e-6);
  EXPECT_EQ(out[0].completer_tag, "identity");
}

TEST(CompleteAll, EmptySetAndEmptyCandidates) {
  EXPECT_EQ(code_of([] { complete_all(CandidateSet{}, baseline_completer()); }), ErrorCode::NoCandidates);
  CandidateSet blanks;
  blanks.partials = {OrientedPointCloud{}, OrientedPointCloud{}};
  EXPECT_EQ(code_of([&] { complete_all(blanks, baseline_completer()); }), ErrorCode::NoCandidates);
}

TEST(CompleteAll, MissingNormalsAreEstimated) {
  const Completer bare{"bare", [](const CompletionRequest& r) {
                         OrientedPointCloud pc;
                         pc.points = r.partial.points;
                         return pc;
                       }, true};
  const auto out = complete_all(one_candidate(oracle::unit_sphere(200, 1, 0.1)), bare);
  EXPECT_TRUE(out[0].reconstruction.has_normals());
}

TEST(MirrorBaseline, CompletesAHemisphere) {
  const auto full = oracle::unit_sphere(6000, 2);
  const auto half = hemisphere(3000, 3);
  const auto done = mirror_baseline_complete(half);
  EXPECT_EQ(done.size(), kCompletionPoints);
  EXPECT_GE(oracle::fraction_within(full, done, kMetricThreshold), 0.9);
  EXPECT_LE(oracle::chamfer(done, full), 0.5 * oracle::chamfer(half, full));
}

TEST(MirrorBaseline, PlanarPatchIsAFixedPoint) {
  OrientedPointCloud patch;
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 20; ++j) {
      patch.points.emplace_back(0.03 * i, 0.05 * j, 0.0);
      patch.normals.emplace_back(0, 0, 1);
    }
  }
  const auto done = mirror_baseline_complete(patch);
  EXPECT_LE(oracle::chamfer(done, patch), 1e-3);
}

TEST(MirrorBaseline, InputOrderDoesNotMatter) {
  const auto half = hemisphere(800, 6);
  auto shuffled = half;
  std::vector<std::size_t> perm(half.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(1));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.points[i] = half.points[perm[i]];
    shuffled.normals[i] = half.normals[perm[i]];
  }
  EXPECT_EQ(mirror_baseline_complete(half).points, mirror_baseline_complete(shuffled).points);
}

TEST(MirrorBaseline, SmallInputsPadToFixedCount) {
  const auto done = mirror_baseline_complete(hemisphere(20, 1));
  EXPECT_EQ(done.size(), kCompletionPoints);
}

TEST(MirrorBaseline, NinePointsIsDegenerate) {
  EXPECT_EQ(code_of([] { mirror_baseline_complete(oracle::unit_sphere(9, 1)); }), ErrorCode::DegenerateCloud);
}

TEST(Exchange, EchoRoundTrip) {
  const auto dir = oracle::temp_dir("xchg-echo");
  FakeRemote remote(dir, Reply::Echo);
  const auto pc = oracle::unit_sphere(500, 7, 0.04);
  const auto out = complete_all(one_candidate(pc), external_completer(quick(dir)));
  ASSERT_EQ(out[0].reconstruction.size(), kCompletionPoints);
  // every echoed point is one of the inputs, up to float storage
  for (const auto& p : out[0].reconstruction.points) EXPECT_LT(oracle::nearest(pc.points, p), 1e-5);
  EXPECT_EQ(out[0].completer_tag, "external");
  EXPECT_FALSE(fs::exists(dir / "cand-0.resp.ply"));
}

TEST(Exchange, RequestCarriesNormalization) {
  const auto dir = oracle::temp_dir("xchg-req");
  CompletionRequest req;
  req.partial = oracle::unit_sphere(50, 1);
  req.id = "probe";
  req.normalization.translation = Vec3(1, 2, 3);
  req.normalization.scale = 0.25;
  EXPECT_EQ(code_of([&] { external_complete(req, quick(dir, 50)); }), ErrorCode::Timeout);
  const auto j = nlohmann::json::parse(read_file(dir / "probe.req.json"));
  EXPECT_EQ(j.at("id"), "probe");
  const auto back = rigid_scale_from_json(j.at("normalization"));
  EXPECT_EQ(back.translation, req.normalization.translation);
  EXPECT_EQ(back.scale, 0.25);
  EXPECT_EQ(read_cloud_ply(dir / "probe.req.ply").size(), 50u);
}

TEST(Exchange, EmptyResponseIsAProtocolError) {
  const auto dir = oracle::temp_dir("xchg-empty");
  FakeRemote remote(dir, Reply::Empty);
  EXPECT_EQ(code_of([&] { complete_all(one_candidate(oracle::unit_sphere(100, 1)), external_completer(quick(dir))); }),
            ErrorCode::ProtocolError);
}

TEST(Exchange, ErrorRecordIsARemoteFailure) {
  const auto dir = oracle::temp_dir("xchg-err");
  FakeRemote remote(dir, Reply::Error);
  try {
    complete_all(one_candidate(oracle::unit_sphere(100, 1)), external_completer(quick(dir)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RemoteFailure);
    EXPECT_NE(std::string(e.what()).find("model crashed"), std::string::npos);
  }
}

TEST(Exchange, SilentPeerTimesOut) {
  const auto dir = oracle::temp_dir("xchg-silent");
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { complete_all(one_candidate(oracle::unit_sphere(100, 1)), external_completer(quick(dir, 200))); }),
            ErrorCode::Timeout);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(200));
}

TEST(Exchange, DefaultsMatchTheProtocol) {
  const ExchangeEndpoint e;
  EXPECT_EQ(e.timeout, std::chrono::seconds(120));
  EXPECT_EQ(e.poll_interval, std::chrono::milliseconds(100));
}

TEST(PointNormals, SphereNormalsPointOutward) {
  const auto pc = oracle::unit_sphere(2000, 3);
  const auto n = estimate_point_normals(pc);
  std::size_t good = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) good += n[i].dot(pc.normals[i]) > 0.95;
  EXPECT_GE(good, 1950u);
}
