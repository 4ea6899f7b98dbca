#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace mmrecon;

namespace {

// wideband, wide-aperture setup whose point response is narrower than a voxel
struct Bench {
  SensorArray array = SensorArray::planar(12, 12, 0.6, 0.6, 0.3);
  Waveform waveform{20e9, 16e9, 48};
  VoxelGridSpec grid = VoxelGridSpec::cube(Point3::Zero(), 12, 0.005);
};

OrientedPointCloud facing_point(const Point3& p, const Point3& toward) {
  OrientedPointCloud pc;
  pc.points = {p};
  pc.normals = {(toward - p).normalized()};
  return pc;
}

}  // namespace

TEST(Backproject, LoneScattererPeaksAtItsVoxel) {
  Bench b;
  for (std::size_t target : {std::size_t{0}, b.grid.index(5, 6, 7), b.grid.index(11, 2, 9)}) {
    const Point3 p = b.grid.center(target);
    const auto sig = simulate_signals(facing_point(p, {0, 0, 0.3}), b.array, b.waveform, {10.0, false});
    const auto vol = backproject_reference(sig, b.grid);
    EXPECT_EQ(vol.argmax(), target);
    // matched filter: the true voxel is at least as bright as every other voxel
    for (std::size_t v = 0; v < vol.values.size(); ++v) EXPECT_LE(vol.magnitude(v), vol.magnitude(target) * (1 + 1e-12));
  }
}

TEST(Backproject, OptimizedMatchesReference) {
  Bench b;
  b.grid.dims = {13, 7, 5};  // ragged x blocks
  auto scene = oracle::unit_sphere(30, 2, 0.02);
  const auto sig = simulate_signals(scene, b.array, b.waveform);
  const auto ref = backproject_reference(sig, b.grid);
  const auto opt = backproject(sig, b.grid);
  EXPECT_LT(max_relative_difference(ref, opt), 1e-6);
}

TEST(Backproject, ReferenceMatchesDefinitionAtSampledVoxels) {
  Bench b;
  b.grid = VoxelGridSpec::cube(Point3::Zero(), 5, 0.006);
  const auto sig = simulate_signals(oracle::unit_sphere(10, 4, 0.02), b.array, b.waveform);
  const auto ref = backproject_reference(sig, b.grid);
  for (std::size_t v : {std::size_t{0}, std::size_t{17}, std::size_t{62}, std::size_t{124}}) {
    const Complex direct = oracle::image_at(sig, b.grid.center(v));
    EXPECT_LT(std::abs(direct - ref.values[v]), 1e-9 * std::abs(direct) + 1e-12);
  }
}

TEST(Backproject, ZeroSignalsGiveZeroVolume) {
  Bench b;
  const auto vol = backproject(SignalSet::zeros(b.array, b.waveform), b.grid);
  for (const auto& c : vol.values) EXPECT_EQ(c, Complex(0, 0));
}

TEST(Backproject, SingleSensorSingleSampleHasConstantMagnitude) {
  SensorArray array;
  array.positions = {{0.01, 0.02, 0.3}};
  auto sig = SignalSet::zeros(array, {20e9, 4e9, 2});
  sig.waveform.num_samples = 2;
  sig.samples = {Complex(0.3, -0.4), Complex(0, 0)};
  const auto vol = backproject(sig, VoxelGridSpec::cube(Point3::Zero(), 6, 0.01));
  for (std::size_t v = 0; v < vol.values.size(); ++v) EXPECT_NEAR(vol.magnitude(v), 0.5, 1e-12);
}

TEST(Backproject, LinearInSignals) {
  Bench b;
  const auto s1 = simulate_signals(oracle::unit_sphere(20, 1, 0.02), b.array, b.waveform);
  auto s2 = add_signal_noise(SignalSet::zeros(b.array, b.waveform), 0.0, 3);
  for (auto& c : s2.samples) c = Complex(std::cos(std::abs(c)), std::sin(3 * c.real()));
  auto sum = s1;
  for (std::size_t i = 0; i < sum.samples.size(); ++i) sum.samples[i] += s2.samples[i];
  const auto v1 = backproject(s1, b.grid), v2 = backproject(s2, b.grid), v12 = backproject(sum, b.grid);
  double scale = 0, diff = 0;
  for (std::size_t i = 0; i < v12.values.size(); ++i) {
    scale = std::max(scale, std::abs(v12.values[i]));
    diff = std::max(diff, std::abs(v12.values[i] - v1.values[i] - v2.values[i]));
  }
  EXPECT_LT(diff, 1e-9 * scale);
}

TEST(Backproject, TranslationEquivariance) {
  Bench b;
  const auto scene = oracle::unit_sphere(25, 6, 0.02);
  const auto vol = backproject(simulate_signals(scene, b.array, b.waveform), b.grid);
  const Vec3 shift(0.125, -0.0625, 0.25);  // exactly representable offsets
  auto moved_scene = scene;
  for (auto& p : moved_scene.points) p += shift;
  auto moved_array = b.array;
  for (auto& p : moved_array.positions) p += shift;
  auto moved_grid = b.grid;
  moved_grid.origin += shift;
  const auto moved = backproject(simulate_signals(moved_scene, moved_array, b.waveform), moved_grid);
  EXPECT_LT(max_relative_difference(vol, moved), 1e-9);
}

TEST(Backproject, InvalidInputs) {
  Bench b;
  auto bad_grid = b.grid;
  bad_grid.spacing = 0;
  EXPECT_THROW(backproject(SignalSet::zeros(b.array, b.waveform), bad_grid), Error);
  auto bad = SignalSet::zeros(b.array, b.waveform);
  bad.samples.pop_back();
  EXPECT_THROW(backproject(bad, b.grid), Error);
}

TEST(Threshold, ExtremesAndArgmax) {
  Bench b;
  const Point3 p = b.grid.center(3, 4, 5);
  const auto vol = backproject(simulate_signals(facing_point(p, {0, 0, 0.3}), b.array, b.waveform, {10.0, false}), b.grid);
  const auto top = threshold_image(vol, 100.0);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top.points[0], p);
  EXPECT_EQ(threshold_image(vol, 0.0).size(), b.grid.size());
}

TEST(Threshold, TwoScatterersBothRecovered) {
  const auto array = SensorArray::planar(16, 16, 0.6, 0.6, 0.3);
  const Waveform w{20e9, 16e9, 48};
  const auto grid = VoxelGridSpec::cube(Point3::Zero(), 64, 0.004);
  const std::size_t a = grid.index(20, 30, 40), c = grid.index(45, 22, 18);
  OrientedPointCloud scene = facing_point(grid.center(a), {0, 0, 0.3});
  scene.append(facing_point(grid.center(c), {0, 0, 0.3}));
  const auto vol = backproject(simulate_signals(scene, array, w, {10.0, false}), grid);
  const auto kept = threshold_image(vol, 99.9);
  int found = 0;
  for (const auto& q : kept.points) found += (q == grid.center(a)) + (q == grid.center(c));
  EXPECT_EQ(found, 2);
}

TEST(VolumeFile, RoundTripWithinFloatPrecision) {
  Bench b;
  const auto vol = backproject(simulate_signals(oracle::unit_sphere(10, 1, 0.02), b.array, b.waveform), b.grid);
  const auto dir = oracle::temp_dir("vol");
  write_volume(vol, dir / "v.bin");
  const auto back = read_volume(dir / "v.bin");
  EXPECT_TRUE(back.grid == vol.grid);
  EXPECT_LT(max_relative_difference(vol, back), 1e-6);
}
