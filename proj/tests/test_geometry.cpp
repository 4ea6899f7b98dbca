#include <fstream>
#include <map>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace mmrecon;

namespace {

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

const char* kCubeObj =
    "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
    "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

}  // namespace

TEST(LoadMesh, SingleTriangleObj) {
  const auto dir = oracle::temp_dir("tri");
  const auto m = load_mesh(write_text(dir / "t.obj", "# one face\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"));
  EXPECT_EQ(m.vertices.size(), 3u);
  EXPECT_EQ(m.faces.size(), 1u);
}

TEST(LoadMesh, UnitCubeObj) {
  const auto dir = oracle::temp_dir("cube");
  const auto m = load_mesh(write_text(dir / "cube.obj", kCubeObj));
  EXPECT_EQ(m.vertices.size(), 8u);
  EXPECT_EQ(m.faces.size(), 12u);
}

TEST(LoadMesh, ZeroAreaFaceIsDropped) {
  const auto dir = oracle::temp_dir("degenerate");
  // twelve faces, the last one collinear along the bottom edge
  std::string text = kCubeObj;
  text.replace(text.find("f 4 5 8\n"), 8, "f 1 9 2\n");
  text.insert(text.find("f "), "v 0.5 0 0\n");
  const auto m = load_mesh(write_text(dir / "cube.obj", text));
  EXPECT_EQ(m.faces.size(), 11u);
}

TEST(LoadMesh, PlyAsciiAndBinaryAgree) {
  const auto dir = oracle::temp_dir("ply");
  const std::string header_body =
      "element vertex 4\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 2\nproperty list uchar int vertex_indices\nend_header\n";
  write_text(dir / "a.ply", "ply\nformat ascii 1.0\n" + header_body + "0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n");
  const float v[12] = {0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0};
  std::string bin = "ply\nformat binary_little_endian 1.0\n" + header_body;
  bin.append(reinterpret_cast<const char*>(v), sizeof v);
  for (const auto& face : {std::array<std::int32_t, 3>{0, 1, 2}, std::array<std::int32_t, 3>{0, 2, 3}}) {
    bin.push_back(3);
    bin.append(reinterpret_cast<const char*>(face.data()), 12);
  }
  write_text(dir / "b.ply", bin);
  const auto a = load_mesh(dir / "a.ply");
  const auto b = load_mesh(dir / "b.ply");
  ASSERT_EQ(a.faces.size(), 2u);
  ASSERT_EQ(b.faces.size(), 2u);
  for (std::size_t i = 0; i < a.vertices.size(); ++i) EXPECT_EQ(a.vertices[i], b.vertices[i]);
  EXPECT_EQ(a.faces, b.faces);
}

TEST(LoadMesh, Errors) {
  const auto dir = oracle::temp_dir("meshErr");
  EXPECT_THROW(load_mesh(dir / "missing.obj"), Error);
  try {
    load_mesh(write_text(dir / "bad.obj", "v 0 0 0\nv 1 0 0\nf 1 2 7\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
  try {
    load_mesh(write_text(dir / "flat.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMesh);
  }
}

TEST(SampleSurface, CubeFaceCountsFollowArea) {
  const auto cube = fixtures::box(1, 1, 1);
  const auto pc = sample_surface(cube, 6000, 3);
  ASSERT_EQ(pc.size(), 6000u);
  std::map<int, int> counts;
  for (const auto& p : pc.points) {
    int axis = 0;
    p.cwiseAbs().maxCoeff(&axis);
    counts[axis * 2 + (p[axis] > 0 ? 1 : 0)]++;
  }
  // multinomial sd = sqrt(6000 * 1/6 * 5/6)
  const double sd = std::sqrt(6000.0 / 6.0 * 5.0 / 6.0);
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [face, n] : counts) EXPECT_NEAR(n, 1000.0, 3 * sd) << "face " << face;
}

TEST(SampleSurface, NormalsPointOutwardAndUnit) {
  const auto pc = sample_surface(fixtures::uv_sphere(1.0, 24, 48), 3000, 1);
  EXPECT_TRUE(pc.valid());
  ASSERT_TRUE(pc.has_normals());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_GT(pc.normals[i].dot(pc.points[i]), 0.9);
}

TEST(SampleSurface, InvertedWindingIsFlippedOutward) {
  auto cube = fixtures::box(1, 1, 1);
  for (auto& f : cube.faces) std::swap(f[1], f[2]);
  const auto pc = sample_surface(cube, 500, 2);
  std::size_t outward = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) outward += pc.normals[i].dot(pc.points[i]) > 0;
  EXPECT_EQ(outward, pc.size());
}

TEST(SampleSurface, SinglePointLiesOnAFace) {
  const auto mesh = fixtures::cylinder(0.3, 0.5, 12);
  const auto pc = sample_surface(mesh, 1, 9);
  ASSERT_EQ(pc.size(), 1u);
  double best = 1e9;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Vec3 n = mesh.face_normal(f);
    best = std::min(best, std::abs(n.dot(pc.points[0] - mesh.vertices[mesh.faces[f][0]])));
  }
  EXPECT_LT(best, 1e-9);
}

TEST(SampleSurface, DeterministicPerSeed) {
  const auto mesh = fixtures::l_bracket(0.2, 0.1, 0.02, 0.1);
  const auto a = sample_surface(mesh, 2000, 5);
  const auto b = sample_surface(mesh, 2000, 5);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.normals, b.normals);
}

TEST(SampleSurface, DifferentSeedsStayClose) {
  const auto mesh = fixtures::uv_sphere(0.5, 24, 48);
  const auto a = sample_surface(mesh, 2000, 1);
  const auto b = sample_surface(mesh, 2000, 2);
  // mean nearest-neighbour spacing within a, excluding the point itself
  const KdTree tree(a.points);
  double spacing = 0.0;
  for (const auto& p : a.points) spacing += std::sqrt(tree.knn(p, 2)[1].sq_dist);
  spacing /= static_cast<double>(a.size());
  EXPECT_LT(chamfer_distance(a, b), 2.0 * spacing);
}

TEST(SampleSurface, EmptyMeshFails) {
  try {
    sample_surface(TriangleMesh{}, 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMesh);
  }
}

TEST(Normalize, SymmetricPair) {
  OrientedPointCloud pc;
  pc.points = {{0, 0, 0}, {2, 0, 0}};
  const auto [out, t] = normalize_to_unit_sphere(pc);
  EXPECT_EQ(out.points[0], Point3(-1, 0, 0));
  EXPECT_EQ(out.points[1], Point3(1, 0, 0));
  EXPECT_DOUBLE_EQ(t.scale, 1.0);
}

TEST(Normalize, AlreadyNormalizedIsNearIdentity) {
  auto pc = oracle::unit_sphere(2000, 4);
  const auto [once, t1] = normalize_to_unit_sphere(pc);
  const auto [twice, t2] = normalize_to_unit_sphere(once);
  EXPECT_NEAR(t2.scale, 1.0, 1e-7);
  EXPECT_LT(t2.translation.norm(), 1e-7);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_LT((once.points[i] - twice.points[i]).norm(), 1e-7);
}

TEST(Normalize, RoundTripRecoversInput) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto pc = oracle::random_cloud(300, seed, 3.0);
    for (auto& p : pc.points) p += Vec3(5, -2, 7);
    const auto [unit, t] = normalize_to_unit_sphere(pc);
    const auto back = t.apply(unit);
    for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_LT((back.points[i] - pc.points[i]).norm(), 1e-7);
    double max_r = 0;
    for (const auto& p : unit.points) max_r = std::max(max_r, p.norm());
    EXPECT_NEAR(max_r, 1.0, 1e-12);
  }
}

TEST(Normalize, DegenerateInputsFail) {
  EXPECT_THROW(normalize_to_unit_sphere(OrientedPointCloud{}), Error);
  OrientedPointCloud same;
  same.points = {{1, 1, 1}, {1, 1, 1}};
  EXPECT_THROW(normalize_to_unit_sphere(same), Error);
}

TEST(Knn, CollinearPoints) {
  OrientedPointCloud pc;
  pc.points = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_EQ(knn(pc, {0, 0, 0}, 2), (std::vector<std::uint32_t>{0, 1}));
}

TEST(Knn, TieGoesToLowerIndex) {
  OrientedPointCloud pc;
  for (int i = 0; i < 10; ++i) pc.points.emplace_back(10.0 + i, 0, 0);
  pc.points[4] = {1, 0, 0};
  pc.points[7] = {-1, 0, 0};
  EXPECT_EQ(knn(pc, {0, 0, 0}, 1), (std::vector<std::uint32_t>{4}));
}

TEST(Knn, MatchesExhaustiveScan) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 100 + 80 * seed;
    auto pc = oracle::random_cloud(n, seed);
    if (seed % 2) {
      // duplicated and lattice points stress the tie rule
      for (std::size_t i = 0; i < n / 4; ++i) pc.points[i] = Point3(std::round(pc.points[i].x() * 2), 0, std::round(pc.points[i].z() * 2));
    }
    const KdTree tree(pc.points);
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int q = 0; q < 20; ++q) {
      const Point3 query = q % 5 == 0 ? pc.points[static_cast<std::size_t>(q)] : Point3(u(rng), u(rng), u(rng));
      for (std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{30}, n}) {
        std::vector<std::uint32_t> got;
        for (const auto& nb : tree.knn(query, k)) got.push_back(nb.index);
        EXPECT_EQ(got, oracle::knn(pc.points, query, k));
      }
    }
  }
}

TEST(Knn, KTooLarge) {
  const auto pc = oracle::random_cloud(5, 1);
  try {
    knn(pc, {0, 0, 0}, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::KTooLarge);
  }
}

TEST(PointCloudPly, RoundTripIsExactForFloatValues) {
  const auto dir = oracle::temp_dir("cloudply");
  auto pc = oracle::unit_sphere(100, 3);
  pc.reflectivity.assign(pc.size(), 0.5);
  pc = [&] {
    OrientedPointCloud q = pc;
    for (auto& p : q.points) p = p.cast<float>().cast<double>();
    for (auto& n : q.normals) n = n.cast<float>().cast<double>();
    return q;
  }();
  write_cloud_ply(pc, dir / "c.ply");
  const auto back = read_cloud_ply(dir / "c.ply");
  EXPECT_EQ(back.points, pc.points);
  // normals are renormalized on read
  ASSERT_EQ(back.normals.size(), pc.normals.size());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_LT((back.normals[i] - pc.normals[i]).norm(), 1e-7);
}
