#pragma once

// Volumetric matched-filter imaging:
//   S(v) = sum_k sum_t h_k(t) exp(j 2 pi 2 |p_k - v| / lambda_t)

#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "mmrecon/geometry.hpp"
#include "mmrecon/grid.hpp"
#include "mmrecon/radar.hpp"

namespace mmrecon {

struct ComplexVolume {
  VoxelGridSpec grid;
  std::vector<Complex> values;

  double magnitude(std::size_t i) const { return std::abs(values[i]); }
  std::vector<double> magnitudes() const {
    std::vector<double> m(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m[i] = std::abs(values[i]);
    return m;
  }
  std::size_t argmax() const {
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double m = std::norm(values[i]);
      if (m > best_mag) best_mag = m, best = i;
    }
    return best;
  }
};

/// Per-voxel focusing output: the image and, on request, sum_k |c_k(v)| u_{k,v}.
struct FocusResult {
  ComplexVolume image;
  std::vector<Vec3> direction_sum;
};

namespace detail {

inline void check_imaging_inputs(const SignalSet& signals, const VoxelGridSpec& grid) {
  if (!signals.valid()) fail(ErrorCode::InvalidArgument, "invalid signal set");
  if (!grid.valid()) fail(ErrorCode::InvalidArgument, "invalid voxel grid");
}

/// Blocked kernel: a run of voxels along x shares the per-sample loop. The per-sensor sum
/// is a polynomial in the unit phasor exp(j dk d), so Horner's rule needs one complex
/// multiply-add per sample and a single rotation by exp(j k0 d) at the end.
template <bool WithDirections>
FocusResult focus(const SignalSet& signals, const VoxelGridSpec& grid) {
  check_imaging_inputs(signals, grid);
  constexpr std::size_t kBlock = 8;
  FocusResult out;
  out.image.grid = grid;
  out.image.values.assign(grid.size(), Complex(0.0, 0.0));
  if constexpr (WithDirections) out.direction_sum.assign(grid.size(), Vec3::Zero());

  const std::size_t nt = signals.num_samples();
  const std::size_t ns = signals.num_sensors();
  const double k0 = 2.0 * std::numbers::pi * 2.0 * signals.waveform.start_frequency / kSpeedOfLight;
  const double dk = 2.0 * std::numbers::pi * 2.0 * signals.waveform.frequency_step() / kSpeedOfLight;

  // split samples into re/im planes for the inner loop
  std::vector<double> h_re(signals.samples.size()), h_im(signals.samples.size());
  for (std::size_t i = 0; i < signals.samples.size(); ++i) {
    h_re[i] = signals.samples[i].real();
    h_im[i] = signals.samples[i].imag();
  }

  const std::size_t nx = grid.dims[0];
  const auto rows = static_cast<std::ptrdiff_t>(grid.dims[1] * grid.dims[2]);

#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const std::size_t j = static_cast<std::size_t>(row) % grid.dims[1];
    const std::size_t kz = static_cast<std::size_t>(row) / grid.dims[1];
    for (std::size_t i0 = 0; i0 < nx; i0 += kBlock) {
      const std::size_t nb = std::min(kBlock, nx - i0);
      double s_re[kBlock] = {}, s_im[kBlock] = {};
      Vec3 dir[kBlock];
      for (auto& d : dir) d.setZero();
      Point3 centers[kBlock];
      for (std::size_t b = 0; b < nb; ++b) centers[b] = grid.center(i0 + b, j, kz);

      for (std::size_t k = 0; k < ns; ++k) {
        const Point3& sensor = signals.array.positions[k];
        double ph_re[kBlock], ph_im[kBlock], z_re[kBlock], z_im[kBlock];
        double acc_re[kBlock] = {}, acc_im[kBlock] = {};
        Vec3 toward[kBlock];
        for (std::size_t b = 0; b < kBlock; ++b) {
          const std::size_t bb = b < nb ? b : 0;
          const Vec3 delta = sensor - centers[bb];
          const double d = delta.norm();
          toward[b] = d > 0 ? Vec3(delta / d) : Vec3::Zero();
          const double a0 = k0 * d, a1 = dk * d;
          ph_re[b] = std::cos(a0);
          ph_im[b] = std::sin(a0);
          z_re[b] = std::cos(a1);
          z_im[b] = std::sin(a1);
        }
        const double* hr = h_re.data() + k * nt;
        const double* hi = h_im.data() + k * nt;
        for (std::size_t t = nt; t-- > 0;) {
          const double a = hr[t], bi = hi[t];
          for (std::size_t b = 0; b < kBlock; ++b) {
            const double nr = acc_re[b] * z_re[b] - acc_im[b] * z_im[b] + a;
            const double ni = acc_re[b] * z_im[b] + acc_im[b] * z_re[b] + bi;
            acc_re[b] = nr;
            acc_im[b] = ni;
          }
        }
        double c_re[kBlock], c_im[kBlock];
        for (std::size_t b = 0; b < kBlock; ++b) {
          c_re[b] = acc_re[b] * ph_re[b] - acc_im[b] * ph_im[b];
          c_im[b] = acc_re[b] * ph_im[b] + acc_im[b] * ph_re[b];
        }
        for (std::size_t b = 0; b < nb; ++b) {
          s_re[b] += c_re[b];
          s_im[b] += c_im[b];
          if constexpr (WithDirections) dir[b] += std::hypot(c_re[b], c_im[b]) * toward[b];
        }
      }
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t idx = grid.index(i0 + b, j, kz);
        out.image.values[idx] = Complex(s_re[b], s_im[b]);
        if constexpr (WithDirections) out.direction_sum[idx] = dir[b];
      }
    }
  }
  return out;
}

}  // namespace detail

/// Reference kernel: evaluates every exponential directly from lambda_t.
inline ComplexVolume backproject_reference(const SignalSet& signals, const VoxelGridSpec& grid) {
  detail::check_imaging_inputs(signals, grid);
  ComplexVolume vol{grid, std::vector<Complex>(grid.size())};
  const std::size_t nt = signals.num_samples();
  std::vector<double> inv_lambda(nt);
  for (std::size_t t = 0; t < nt; ++t) inv_lambda[t] = 1.0 / signals.waveform.wavelength(t);
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t v = 0; v < n; ++v) {
    const Point3 center = grid.center(static_cast<std::size_t>(v));
    Complex sum(0.0, 0.0);
    for (std::size_t k = 0; k < signals.num_sensors(); ++k) {
      const double d = (signals.array.positions[k] - center).norm();
      for (std::size_t t = 0; t < nt; ++t) {
        sum += signals.at(k, t) * std::polar(1.0, 2.0 * std::numbers::pi * 2.0 * d * inv_lambda[t]);
      }
    }
    vol.values[static_cast<std::size_t>(v)] = sum;
  }
  return vol;
}

/// Optimized kernel; agrees with backproject_reference to ~1e-13 relative.
inline ComplexVolume backproject(const SignalSet& signals, const VoxelGridSpec& grid) {
  return detail::focus<false>(signals, grid).image;
}

/// Voxel centres whose |S| reaches the nearest-rank percentile of all |S|.
inline OrientedPointCloud threshold_image(const ComplexVolume& volume, double percentile) {
  if (volume.values.empty()) fail(ErrorCode::InvalidArgument, "empty volume");
  const auto mags = volume.magnitudes();
  const double cut = nearest_rank_percentile(mags, percentile);
  OrientedPointCloud pc;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    if (mags[i] >= cut) pc.points.push_back(volume.grid.center(i));
  }
  return pc;
}

/// max |a - b| / max |a|; 0 when both volumes vanish.
inline double max_relative_difference(const ComplexVolume& a, const ComplexVolume& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
    scale = std::max(scale, std::abs(a.values[i]));
  }
  return scale > 0 ? diff / scale : diff;
}

// --- MMVOL1 binary format -------------------------------------------------
// "MMVOL1" | f64 origin x,y,z | f64 spacing | u64 nx,ny,nz | nx*ny*nz x (f32 re, f32 im)

inline void write_volume(const ComplexVolume& vol, const std::filesystem::path& path) {
  std::string buf = "MMVOL1";
  for (int a = 0; a < 3; ++a) detail::put_le<double>(buf, vol.grid.origin[a]);
  detail::put_le<double>(buf, vol.grid.spacing);
  for (auto d : vol.grid.dims) detail::put_le<std::uint64_t>(buf, d);
  for (const auto& c : vol.values) {
    detail::put_le<float>(buf, static_cast<float>(c.real()));
    detail::put_le<float>(buf, static_cast<float>(c.imag()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline ComplexVolume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  char magic[6];
  in.read(magic, 6);
  if (!in || std::string(magic, 6) != "MMVOL1") fail(ErrorCode::ParseError, path.string() + ": bad MMVOL1 magic");
  ComplexVolume vol;
  for (int a = 0; a < 3; ++a) vol.grid.origin[a] = detail::get_le<double>(in, "header");
  vol.grid.spacing = detail::get_le<double>(in, "header");
  for (auto& d : vol.grid.dims) d = detail::get_le<std::uint64_t>(in, "header");
  if (!vol.grid.valid() || vol.grid.size() > (1ull << 30)) fail(ErrorCode::ParseError, path.string() + ": bad grid");
  vol.values.resize(vol.grid.size());
  for (auto& c : vol.values) {
    const auto re = detail::get_le<float>(in, "values");
    const auto im = detail::get_le<float>(in, "values");
    c = Complex(re, im);
  }
  return vol;
}

}  // namespace mmrecon
