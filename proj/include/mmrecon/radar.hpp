#pragma once

#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mmrecon/geometry.hpp"
#include "mmrecon/visibility.hpp"

namespace mmrecon {

using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct SensorArray {
  std::vector<Point3> positions;
  Vec3 boresight{0.0, 0.0, -1.0};

  bool valid() const {
    if (positions.empty() || std::abs(boresight.norm() - 1.0) > 1e-6) return false;
    for (const auto& p : positions) {
      if (!is_finite(p)) return false;
    }
    return true;
  }

  /// Regular nx-by-ny grid in the plane z = height, centered on (cx, cy), looking down -z.
  static SensorArray planar(std::size_t nx, std::size_t ny, double width_x, double width_y, double height,
                            double cx = 0.0, double cy = 0.0) {
    SensorArray a;
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = nx > 1 ? cx - width_x / 2 + width_x * static_cast<double>(i) / static_cast<double>(nx - 1) : cx;
        const double y = ny > 1 ? cy - width_y / 2 + width_y * static_cast<double>(j) / static_cast<double>(ny - 1) : cy;
        a.positions.emplace_back(x, y, height);
      }
    }
    return a;
  }
};

/// Linear FMCW sweep sampled at num_samples frequencies.
struct Waveform {
  double start_frequency = 77e9;
  double bandwidth = 4e9;
  std::size_t num_samples = 256;

  bool valid() const { return start_frequency > 0.0 && bandwidth > 0.0 && num_samples >= 2; }

  double frequency(std::size_t t) const {
    return start_frequency + bandwidth * static_cast<double>(t) / static_cast<double>(num_samples - 1);
  }
  double wavelength(std::size_t t) const { return kSpeedOfLight / frequency(t); }
  double frequency_step() const { return bandwidth / static_cast<double>(num_samples - 1); }
};

/// Complex baseband samples h_k(t), row-major N x T.
struct SignalSet {
  SensorArray array;
  Waveform waveform;
  std::vector<Complex> samples;

  std::size_t num_sensors() const noexcept { return array.positions.size(); }
  std::size_t num_samples() const noexcept { return waveform.num_samples; }

  Complex& at(std::size_t k, std::size_t t) { return samples[k * waveform.num_samples + t]; }
  const Complex& at(std::size_t k, std::size_t t) const { return samples[k * waveform.num_samples + t]; }

  static SignalSet zeros(SensorArray array, Waveform waveform) {
    SignalSet s{std::move(array), waveform, {}};
    s.samples.assign(s.num_sensors() * waveform.num_samples, Complex(0.0, 0.0));
    return s;
  }

  bool valid() const {
    if (!array.valid() || !waveform.valid()) return false;
    if (samples.size() != num_sensors() * waveform.num_samples) return false;
    for (const auto& c : samples) {
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
    }
    return true;
  }

  double mean_power() const {
    double p = 0.0;
    for (const auto& c : samples) p += std::norm(c);
    return samples.empty() ? 0.0 : p / static_cast<double>(samples.size());
  }
};

struct SimulationOptions {
  double specular_sigma = 0.35;
  /// Drop self-occluded scene points (spherical-flip HPR from a subset of sensors) first.
  bool hidden_point_removal = false;
};

/// Gaussian specular lobe: exp(-(theta / sigma)^2), theta between normal and direction to sensor.
inline double specular_weight(const Vec3& normal, const Vec3& to_sensor_unit, double sigma) {
  const double c = std::clamp(normal.dot(to_sensor_unit), -1.0, 1.0);
  const double theta = std::acos(c);
  const double r = theta / sigma;
  return std::exp(-r * r);
}

/// h_k(t) = sum_i a_i w_k(s_i) exp(-j 2 pi 2 |p_k - s_i| / lambda_t). No path loss.
inline SignalSet simulate_signals(const OrientedPointCloud& scene_in, const SensorArray& array, const Waveform& waveform,
                                  const SimulationOptions& options = {}) {
  if (!(options.specular_sigma > 0.0)) fail(ErrorCode::InvalidArgument, "specular_sigma must be > 0");
  if (!array.valid()) fail(ErrorCode::InvalidArgument, "invalid sensor array");
  if (!waveform.valid()) fail(ErrorCode::InvalidArgument, "invalid waveform");
  SignalSet out = SignalSet::zeros(array, waveform);
  if (scene_in.empty()) return out;
  if (!scene_in.has_normals()) fail(ErrorCode::MissingNormals, "scene needs normals for the specular model");

  const OrientedPointCloud scene = options.hidden_point_removal && scene_in.size() >= 4
                                       ? scene_in.filtered(radar_facing_mask_union(scene_in, array.positions, 16))
                                       : scene_in;

  const std::size_t nt = waveform.num_samples;
  const double k0 = 2.0 * std::numbers::pi * 2.0 * waveform.start_frequency / kSpeedOfLight;
  const double dk = 2.0 * std::numbers::pi * 2.0 * waveform.frequency_step() / kSpeedOfLight;
  const auto ns = static_cast<std::ptrdiff_t>(array.positions.size());

  // phase is linear in t: exp(-j(k0 + t dk) d), so each point's term is advanced by a unit
  // phasor; points go through in blocks so the sample loop vectorizes
  constexpr std::size_t kBlock = 8;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < ns; ++k) {
    const Point3& sensor = array.positions[static_cast<std::size_t>(k)];
    std::vector<double> acc_re(nt, 0.0), acc_im(nt, 0.0);
    for (std::size_t i0 = 0; i0 < scene.size(); i0 += kBlock) {
      double ph_re[kBlock] = {}, ph_im[kBlock] = {}, st_re[kBlock], st_im[kBlock];
      for (std::size_t b = 0; b < kBlock; ++b) {
        st_re[b] = 1.0;
        st_im[b] = 0.0;
        const std::size_t i = i0 + b;
        if (i >= scene.size()) continue;
        const Vec3 delta = sensor - scene.points[i];
        const double d = delta.norm();
        if (d <= 0.0) continue;
        const double amp = scene.reflectivity_at(i) * specular_weight(scene.normals[i], delta / d, options.specular_sigma);
        if (amp == 0.0) continue;
        ph_re[b] = amp * std::cos(k0 * d);
        ph_im[b] = -amp * std::sin(k0 * d);
        st_re[b] = std::cos(dk * d);
        st_im[b] = -std::sin(dk * d);
      }
      for (std::size_t t = 0; t < nt; ++t) {
        double sr = 0.0, si = 0.0;
        for (std::size_t b = 0; b < kBlock; ++b) {
          sr += ph_re[b];
          si += ph_im[b];
          const double nr = ph_re[b] * st_re[b] - ph_im[b] * st_im[b];
          const double ni = ph_re[b] * st_im[b] + ph_im[b] * st_re[b];
          ph_re[b] = nr;
          ph_im[b] = ni;
        }
        acc_re[t] += sr;
        acc_im[t] += si;
      }
    }
    Complex* row = out.samples.data() + static_cast<std::size_t>(k) * nt;
    for (std::size_t t = 0; t < nt; ++t) row[t] = Complex(acc_re[t], acc_im[t]);
  }
  return out;
}

/// Adds circular complex Gaussian noise at the requested mean-signal-power to noise-power ratio.
inline SignalSet add_signal_noise(const SignalSet& signals, double snr_db, std::uint64_t seed) {
  if (signals.samples.empty()) fail(ErrorCode::InvalidArgument, "empty signal set");
  SignalSet out = signals;
  const double noise_power = signals.mean_power() / std::pow(10.0, snr_db / 10.0);
  if (noise_power == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, std::sqrt(noise_power / 2.0));
  for (auto& c : out.samples) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    c += Complex(re, im);
  }
  return out;
}

// --- MMSIG1 binary format -------------------------------------------------
// "MMSIG1" | u64 N | u64 T | f64 start_frequency | f64 bandwidth |
// N*T x (f32 re, f32 im) | N x (f64 x, f64 y, f64 z); all little-endian.

namespace detail {

template <typename T>
void put_le(std::string& buf, T v) {
  static_assert(std::endian::native == std::endian::little);
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorCode::ParseError, "truncated " + what);
  return v;
}

}  // namespace detail

inline void write_signals(const SignalSet& s, const std::filesystem::path& path) {
  std::string buf = "MMSIG1";
  detail::put_le<std::uint64_t>(buf, s.num_sensors());
  detail::put_le<std::uint64_t>(buf, s.num_samples());
  detail::put_le<double>(buf, s.waveform.start_frequency);
  detail::put_le<double>(buf, s.waveform.bandwidth);
  for (const auto& c : s.samples) {
    detail::put_le<float>(buf, static_cast<float>(c.real()));
    detail::put_le<float>(buf, static_cast<float>(c.imag()));
  }
  for (const auto& p : s.array.positions) {
    detail::put_le<double>(buf, p.x());
    detail::put_le<double>(buf, p.y());
    detail::put_le<double>(buf, p.z());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline SignalSet read_signals(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::string(magic, 6) != "MMSIG1") fail(ErrorCode::ParseError, path.string() + ": bad MMSIG1 magic");
  const auto n = detail::get_le<std::uint64_t>(in, "header");
  const auto t = detail::get_le<std::uint64_t>(in, "header");
  SignalSet s;
  s.waveform.start_frequency = detail::get_le<double>(in, "header");
  s.waveform.bandwidth = detail::get_le<double>(in, "header");
  s.waveform.num_samples = t;
  if (n == 0 || n > (1u << 24) || t < 2 || t > (1u << 20)) fail(ErrorCode::ParseError, path.string() + ": implausible N/T");
  s.samples.resize(n * t);
  for (auto& c : s.samples) {
    const auto re = detail::get_le<float>(in, "samples");
    const auto im = detail::get_le<float>(in, "samples");
    c = Complex(re, im);
  }
  s.array.positions.resize(n);
  for (auto& p : s.array.positions) {
    const auto x = detail::get_le<double>(in, "positions");
    const auto y = detail::get_le<double>(in, "positions");
    const auto z = detail::get_le<double>(in, "positions");
    p = Point3(x, y, z);
  }
  if (!s.valid()) fail(ErrorCode::ParseError, path.string() + ": invalid signal content");
  return s;
}

}  // namespace mmrecon
