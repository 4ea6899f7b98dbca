#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace mmrecon;

namespace {

Waveform small_waveform() { return {20e9, 4e9, 16}; }

OrientedPointCloud lone(const Point3& p, const Vec3& n, double reflectivity = 1.0) {
  OrientedPointCloud pc;
  pc.points = {p};
  pc.normals = {n.normalized()};
  pc.reflectivity = {reflectivity};
  return pc;
}

double max_abs_diff(const SignalSet& a, const SignalSet& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) d = std::max(d, std::abs(a.samples[i] - b.samples[i]));
  return d;
}

double max_abs(const SignalSet& a) {
  double m = 0.0;
  for (const auto& c : a.samples) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

TEST(Simulate, FacingScattererHasUnitMagnitudeAndRangePhase) {
  SensorArray array;
  array.positions = {{0.01, -0.02, 0.4}};
  const Point3 s(0.0, 0.0, 0.05);
  const auto w = small_waveform();
  const auto sig = simulate_signals(lone(s, array.positions[0] - s), array, w, {0.35, false});
  const double d = (array.positions[0] - s).norm();
  for (std::size_t t = 0; t < w.num_samples; ++t) {
    EXPECT_NEAR(std::abs(sig.at(0, t)), 1.0, 1e-12);
    const double expected = -2.0 * std::numbers::pi * 2.0 * d / w.wavelength(t);
    const double diff = std::remainder(std::arg(sig.at(0, t)) - expected, 2.0 * std::numbers::pi);
    EXPECT_NEAR(diff, 0.0, 1e-9);
  }
}

TEST(Simulate, PerpendicularNormalIsEffectivelyInvisible) {
  SensorArray array;
  array.positions = {{0, 0, 0.4}};
  const auto sig = simulate_signals(lone({0, 0, 0}, {1, 0, 0}), array, small_waveform(), {0.35, false});
  const double expected = std::exp(-std::pow((std::numbers::pi / 2) / 0.35, 2));
  EXPECT_NEAR(expected, 1.7e-9, 0.1e-9);
  for (const auto& c : sig.samples) EXPECT_NEAR(std::abs(c), expected, 1e-15);
}

TEST(Simulate, EmptySceneGivesZeros) {
  const auto array = SensorArray::planar(3, 3, 0.1, 0.1, 0.3);
  const auto sig = simulate_signals(OrientedPointCloud{}, array, small_waveform());
  EXPECT_EQ(sig.samples.size(), 9u * 16u);
  EXPECT_EQ(max_abs(sig), 0.0);
}

TEST(Simulate, MatchesDirectSummation) {
  const auto array = SensorArray::planar(4, 3, 0.2, 0.15, 0.3);
  const auto w = small_waveform();
  auto scene = oracle::unit_sphere(37, 5, 0.05);
  scene.reflectivity.resize(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) scene.reflectivity[i] = 0.5 + 0.01 * static_cast<double>(i);
  const auto fast = simulate_signals(scene, array, w, {0.35, false});
  const auto slow = oracle::signals(scene, array, w, 0.35);
  EXPECT_LT(max_abs_diff(fast, slow), 1e-9 * max_abs(slow));
}

TEST(Simulate, Linearity) {
  const auto array = SensorArray::planar(5, 5, 0.3, 0.3, 0.3);
  const auto w = small_waveform();
  const auto a = oracle::unit_sphere(40, 1, 0.05);
  auto b = oracle::unit_sphere(25, 2, 0.03);
  for (auto& p : b.points) p += Vec3(0.02, 0.0, 0.01);
  OrientedPointCloud ab = a;
  ab.append(b);
  const auto sa = simulate_signals(a, array, w);
  const auto sb = simulate_signals(b, array, w);
  const auto sab = simulate_signals(ab, array, w);
  for (std::size_t i = 0; i < sab.samples.size(); ++i) {
    EXPECT_LT(std::abs(sab.samples[i] - sa.samples[i] - sb.samples[i]), 1e-9 * max_abs(sab));
  }
}

TEST(Simulate, DoublingDistanceDoublesPhaseDelay) {
  SensorArray array;
  array.positions = {{0, 0, 0}};
  const auto w = small_waveform();
  const Vec3 up(0, 0, 1);
  const double d = 0.137;
  const auto near = simulate_signals(lone({0, 0, -d}, up), array, w);
  const auto far = simulate_signals(lone({0, 0, -2 * d}, up), array, w);
  for (std::size_t t = 0; t < w.num_samples; ++t) {
    // phase(far) = 2 phase(near), so far * conj(near)^2 has zero phase
    const Complex z = far.at(0, t) * std::conj(near.at(0, t) * near.at(0, t));
    EXPECT_NEAR(std::arg(z), 0.0, 1e-9);
  }
}

TEST(Simulate, NegatedReflectivityNegatesSignal) {
  const auto array = SensorArray::planar(3, 4, 0.2, 0.2, 0.3);
  auto scene = oracle::unit_sphere(30, 3, 0.05);
  scene.reflectivity.assign(scene.size(), 0.7);
  auto neg = scene;
  for (auto& r : neg.reflectivity) r = -r;
  const auto a = simulate_signals(scene, array, small_waveform());
  const auto b = simulate_signals(neg, array, small_waveform());
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i], -b.samples[i]);
}

TEST(Simulate, HiddenPointRemovalDropsOccludedScatterer) {
  SensorArray array;
  array.positions = {{0, 0, 1.0}};
  OrientedPointCloud scene = oracle::unit_sphere(400, 8, 0.05);
  // a scatterer under the sphere, facing the sensor through it
  scene.points.push_back({0, 0, -0.06});
  scene.normals.push_back({0, 0, 1});
  const auto w = small_waveform();
  OrientedPointCloud without = scene;
  without.points.pop_back();
  without.normals.pop_back();
  const auto hpr = simulate_signals(scene, array, w, {0.35, true});
  const auto no_hidden = simulate_signals(without, array, w, {0.35, true});
  const auto plain = simulate_signals(scene, array, w, {0.35, false});
  EXPECT_LT(max_abs_diff(hpr, no_hidden), 1e-9);
  EXPECT_GT(max_abs_diff(plain, no_hidden), 0.5);
}

TEST(Simulate, Errors) {
  const auto array = SensorArray::planar(2, 2, 0.1, 0.1, 0.3);
  OrientedPointCloud no_normals;
  no_normals.points = {{0, 0, 0}};
  try {
    simulate_signals(no_normals, array, small_waveform());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingNormals);
  }
  EXPECT_THROW(simulate_signals(lone({0, 0, 0}, {0, 0, 1}), array, {20e9, 4e9, 1}), Error);
  EXPECT_THROW(simulate_signals(lone({0, 0, 0}, {0, 0, 1}), SensorArray{}, small_waveform()), Error);
}

TEST(Noise, HugeSnrLeavesSignalUnchanged) {
  const auto array = SensorArray::planar(4, 4, 0.2, 0.2, 0.3);
  const auto sig = simulate_signals(oracle::unit_sphere(50, 1, 0.05), array, small_waveform());
  const auto noisy = add_signal_noise(sig, 300.0, 4);
  EXPECT_LT(max_abs_diff(sig, noisy), 1e-10 * max_abs(sig));
}

TEST(Noise, ZeroDbMatchesSignalPower) {
  SensorArray array;
  for (int i = 0; i < 200; ++i) array.positions.emplace_back(0.001 * i, 0, 1);
  auto sig = SignalSet::zeros(array, {20e9, 4e9, 64});
  for (auto& c : sig.samples) c = Complex(1.0, 0.0);
  const auto noisy = add_signal_noise(sig, 0.0, 11);
  double p = 0.0;
  for (std::size_t i = 0; i < sig.samples.size(); ++i) p += std::norm(noisy.samples[i] - sig.samples[i]);
  p /= static_cast<double>(sig.samples.size());
  ASSERT_GE(sig.samples.size(), 10000u);
  EXPECT_NEAR(p, 1.0, 0.05);
}

TEST(Noise, SameSeedSameOutput) {
  const auto array = SensorArray::planar(3, 3, 0.2, 0.2, 0.3);
  const auto sig = simulate_signals(oracle::unit_sphere(20, 1, 0.05), array, small_waveform());
  EXPECT_EQ(add_signal_noise(sig, 10.0, 5).samples, add_signal_noise(sig, 10.0, 5).samples);
  EXPECT_NE(add_signal_noise(sig, 10.0, 5).samples, add_signal_noise(sig, 10.0, 6).samples);
}

TEST(SignalFile, RoundTripIsExactAtComplex64) {
  const auto dir = oracle::temp_dir("sig");
  const auto array = SensorArray::planar(3, 2, 0.2, 0.2, 0.3, 0.01, -0.02);
  const auto sig = simulate_signals(oracle::unit_sphere(20, 1, 0.05), array, small_waveform());
  write_signals(sig, dir / "s.mmsig");
  const auto back = read_signals(dir / "s.mmsig");
  auto expected = sig.samples;
  for (auto& c : expected) c = Complex(static_cast<float>(c.real()), static_cast<float>(c.imag()));
  EXPECT_EQ(back.samples, expected);
  EXPECT_EQ(back.array.positions, sig.array.positions);
  EXPECT_EQ(back.waveform.start_frequency, sig.waveform.start_frequency);
  EXPECT_EQ(back.waveform.num_samples, sig.waveform.num_samples);
}

TEST(SignalFile, TruncatedFileIsAParseError) {
  const auto dir = oracle::temp_dir("sigbad");
  const auto sig = simulate_signals(oracle::unit_sphere(5, 1, 0.05), SensorArray::planar(2, 2, 0.2, 0.2, 0.3), small_waveform());
  write_signals(sig, dir / "s.mmsig");
  std::filesystem::resize_file(dir / "s.mmsig", std::filesystem::file_size(dir / "s.mmsig") - 7);
  try {
    read_signals(dir / "s.mmsig");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
  }
}
