#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evmirror/config_io.hpp"
#include "evmirror/ensemble.hpp"
#include "evmirror/errors.hpp"
#include "evmirror/parallel.hpp"
#include "evmirror/params.hpp"
#include "evmirror/rng.hpp"

namespace evmirror {

/// Column density on the camera grid: counts per pixel, line of sight y.
struct AbsorptionImage {
  int pixels_x = 0;
  int pixels_z = 0;
  std::vector<double> data;  // row-major, data[iz * pixels_x + ix]
  double pitch_x = 0.0;      // m/px
  double pitch_z = 0.0;      // m/px
  double origin_x = 0.0;     // m, low-x pixel edge
  double origin_z = 0.0;     // m, low-z pixel edge
  double time = 0.0;         // s, ensemble time at exposure
  std::size_t dropped = 0;   // atoms outside the field

  double& at(int ix, int iz) { return data[static_cast<std::size_t>(iz) * pixels_x + ix]; }
  double at(int ix, int iz) const { return data[static_cast<std::size_t>(iz) * pixels_x + ix]; }
  double center_x(int ix) const { return origin_x + (ix + 0.5) * pitch_x; }
  double center_z(int iz) const { return origin_z + (iz + 0.5) * pitch_z; }

  double sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
  }
};

namespace detail {

// In-place separable blur, one axis at a time. The kernel is a discrete
// Gaussian truncated at 4 sigma; near the border each source pixel's kernel
// is renormalized over the taps that stay inside, so every count lands
// somewhere and the image sum is preserved.
inline void blur_axis(std::vector<double>& data, int nx, int nz, double sigma_px, bool along_x) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma_px));
  std::vector<double> w(2 * radius + 1);
  double wsum = 0.0;
  for (int k = -radius; k <= radius; ++k)
    wsum += w[k + radius] = std::exp(-0.5 * k * k / (sigma_px * sigma_px));
  for (double& wk : w) wk /= wsum;

  const int n_lines = along_x ? nz : nx;
  const int n = along_x ? nx : nz;
  std::vector<double> line(n), out(n);
  for (int l = 0; l < n_lines; ++l) {
    auto idx = [&](int i) {
      return along_x ? static_cast<std::size_t>(l) * nx + i : static_cast<std::size_t>(i) * nx + l;
    };
    for (int i = 0; i < n; ++i) line[i] = data[idx(i)];
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      if (line[i] == 0.0) continue;
      const int lo = std::max(i - radius, 0);
      const int hi = std::min(i + radius, n - 1);
      double inside = 0.0;
      for (int j = lo; j <= hi; ++j) inside += w[j - i + radius];
      const double scale = line[i] / inside;
      for (int j = lo; j <= hi; ++j) out[j] += scale * w[j - i + radius];
    }
    for (int i = 0; i < n; ++i) data[idx(i)] = out[i];
  }
}

}  // namespace detail

/// Bins each atom into the (x, z) pixel containing it, then applies the
/// optical-resolution blur. Out-of-field atoms are dropped and counted.
inline AbsorptionImage render_image(const AtomEnsemble& ens, const ImagingParams& imaging,
                                    unsigned threads = 1) {
  if (imaging.pixels_x <= 0 || imaging.pixels_z <= 0 || !(imaging.field_x > 0.0) ||
      !(imaging.field_z > 0.0))
    throw std::invalid_argument("render_image: zero-size field");

  AbsorptionImage img;
  img.pixels_x = imaging.pixels_x;
  img.pixels_z = imaging.pixels_z;
  img.pitch_x = imaging.pitch_x();
  img.pitch_z = imaging.pitch_z();
  img.origin_x = imaging.origin_x;
  img.origin_z = imaging.origin_z;
  img.time = ens.time;
  img.data.assign(static_cast<std::size_t>(img.pixels_x) * img.pixels_z, 0.0);

  const unsigned n_workers = resolve_threads(threads);
  std::vector<std::vector<double>> partial(n_workers);
  std::vector<std::size_t> partial_dropped(n_workers, 0);
  // Unit-count accumulation is order-independent in double well below 2^53
  // counts, but per-worker buffers keep the scatter writes race-free.
  parallel_for_indexed(ens.size(), n_workers, [&](unsigned worker, std::size_t begin, std::size_t end) {
    auto& buf = partial[worker];
    buf.assign(img.data.size(), 0.0);
    std::size_t local_dropped = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = ens.positions[i];
      const double fx = (p.x - img.origin_x) / img.pitch_x;
      const double fz = (p.z - img.origin_z) / img.pitch_z;
      const int ix = static_cast<int>(std::floor(fx));
      const int iz = static_cast<int>(std::floor(fz));
      if (ix >= 0 && ix < img.pixels_x && iz >= 0 && iz < img.pixels_z)
        buf[static_cast<std::size_t>(iz) * img.pixels_x + ix] += 1.0;
      else
        ++local_dropped;
    }
    partial_dropped[worker] = local_dropped;
  });
  for (unsigned t = 0; t < n_workers; ++t) {
    if (partial[t].empty()) continue;
    for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] += partial[t][k];
    img.dropped += partial_dropped[t];
  }

  if (imaging.blur_rms > 0.0) {
    detail::blur_axis(img.data, img.pixels_x, img.pixels_z, imaging.blur_rms, true);
    detail::blur_axis(img.data, img.pixels_x, img.pixels_z, imaging.blur_rms, false);
  }
  return img;
}

/// Replaces each pixel by a Poisson draw with that mean; off unless invoked.
inline void apply_poisson_noise(AbsorptionImage& img, std::uint64_t seed) {
  for (std::size_t k = 0; k < img.data.size(); ++k) {
    const double mean = img.data[k];
    if (mean <= 0.0) continue;
    rng::Stream st(seed, k, rng::Purpose::kImageNoise);
    if (mean < 64.0) {
      const double limit = std::exp(-mean);
      double prod = st.uniform();
      int count = 0;
      while (prod > limit) {
        prod *= st.uniform();
        ++count;
      }
      img.data[k] = count;
    } else {
      img.data[k] = std::max(0.0, std::round(mean + std::sqrt(mean) * st.gaussian()));
    }
  }
}

struct PixelCalibration {
  double pitch;         // m/px
  double rms_residual;  // px
};

/// Pitch from the free-fall track of the cloud's centre of mass: least-squares
/// fit of pixel row against c0 + c1 t + c2 t^2, with c2 = g / (2 pitch).
inline PixelCalibration calibrate_pixel_size(const std::vector<std::pair<double, double>>& track,
                                             const PhysicalConstants& constants) {
  std::vector<double> times;
  for (const auto& [t, row] : track) times.push_back(t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  if (times.size() < 3)
    throw std::invalid_argument("calibrate_pixel_size: need samples at >= 3 distinct times");

  // Normal equations for the quadratic fit.
  double s[5] = {0, 0, 0, 0, 0};  // sums of t^0 .. t^4
  double b[3] = {0, 0, 0};        // sums of row * t^0 .. t^2
  for (const auto& [t, row] : track) {
    double tp = 1.0;
    for (int k = 0; k < 5; ++k, tp *= t) {
      s[k] += tp;
      if (k < 3) b[k] += row * tp;
    }
  }
  double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
  double c[3] = {b[0], b[1], b[2]};
  for (int col = 0; col < 3; ++col) {  // Gaussian elimination with partial pivoting
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(c[col], c[piv]);
    if (m[col][col] == 0.0)
      throw NumericsError("calibrate_pixel_size: singular normal equations");
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
      c[r] -= f * c[col];
    }
  }
  double coef[3];
  for (int r = 2; r >= 0; --r) {
    double acc = c[r];
    for (int k = r + 1; k < 3; ++k) acc -= m[r][k] * coef[k];
    coef[r] = acc / m[r][r];
  }
  if (!(coef[2] > 0.0))
    throw NumericsError("calibrate_pixel_size: track does not accelerate downward");

  double ss = 0.0;
  for (const auto& [t, row] : track) {
    const double fit = coef[0] + coef[1] * t + coef[2] * t * t;
    ss += (row - fit) * (row - fit);
  }
  return {0.5 * constants.g / coef[2], std::sqrt(ss / track.size())};
}

/// z-profile normalized to unit peak; coordinates strictly increasing.
struct DensityProfile {
  std::vector<double> z;      // m
  std::vector<double> value;  // peak = 1
};

namespace detail {

inline DensityProfile extract_z_profile_impl(const AbsorptionImage& img, double extent_x,
                                             double extent_z, double cx, double cz) {
  // Pixels whose centers fall in the region, intersected with the field.
  const int ix0 = std::max(
      static_cast<int>(std::ceil((cx - 0.5 * extent_x - img.origin_x) / img.pitch_x - 0.5)), 0);
  const int ix1 = std::min(
      static_cast<int>(std::floor((cx + 0.5 * extent_x - img.origin_x) / img.pitch_x - 0.5)),
      img.pixels_x - 1);
  const int iz0 = std::max(
      static_cast<int>(std::ceil((cz - 0.5 * extent_z - img.origin_z) / img.pitch_z - 0.5)), 0);
  const int iz1 = std::min(
      static_cast<int>(std::floor((cz + 0.5 * extent_z - img.origin_z) / img.pitch_z - 0.5)),
      img.pixels_z - 1);
  if (ix1 < ix0 || iz1 < iz0)
    throw std::invalid_argument("extract_z_profile: region does not cover any pixel");

  DensityProfile prof;
  double peak = 0.0;
  for (int iz = iz0; iz <= iz1; ++iz) {
    double acc = 0.0;
    for (int ix = ix0; ix <= ix1; ++ix) acc += img.at(ix, iz);
    prof.z.push_back(img.center_z(iz));
    prof.value.push_back(acc);
    peak = std::max(peak, acc);
  }
  if (peak == 0.0) throw NumericsError("extract_z_profile: region is all zero");
  for (double& v : prof.value) v /= peak;
  return prof;
}

}  // namespace detail

/// Region centered on the given point.
inline DensityProfile extract_z_profile(const AbsorptionImage& img, double extent_x,
                                        double extent_z, double center_x, double center_z) {
  return detail::extract_z_profile_impl(img, extent_x, extent_z, center_x, center_z);
}

/// Physical coordinates of the peak-density pixel, the default region center.
inline std::pair<double, double> peak_center(const AbsorptionImage& img) {
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t k = 0; k < img.data.size(); ++k)
    if (img.data[k] > best_v) {
      best_v = img.data[k];
      best = k;
    }
  if (best_v <= 0.0) throw NumericsError("peak_center: image is all zero, no peak");
  const int iz = static_cast<int>(best / img.pixels_x);
  const int ix = static_cast<int>(best % img.pixels_x);
  return {img.center_x(ix), img.center_z(iz)};
}

/// Region auto-centered on the peak-density pixel.
inline DensityProfile extract_z_profile(const AbsorptionImage& img, double extent_x,
                                        double extent_z) {
  const auto [cx, cz] = peak_center(img);
  return detail::extract_z_profile_impl(img, extent_x, extent_z, cx, cz);
}

/// Per-column sums (z integrated out) for the horizontal cloud shape.
inline void x_marginal(const AbsorptionImage& img, std::vector<double>& coords,
                       std::vector<double>& values) {
  coords.resize(img.pixels_x);
  values.assign(img.pixels_x, 0.0);
  for (int ix = 0; ix < img.pixels_x; ++ix) coords[ix] = img.center_x(ix);
  for (int iz = 0; iz < img.pixels_z; ++iz)
    for (int ix = 0; ix < img.pixels_x; ++ix) values[ix] += img.at(ix, iz);
}

struct GaussianFit {
  double width;         // 1/sqrt(e) half-width = standard deviation, coordinate units
  double center;        // coordinate units
  double amplitude;
  int iterations;
  double rms_residual;  // value units
};

namespace detail {

inline constexpr int kMaxFitIterations = 200;

}  // namespace detail

/// Levenberg-Marquardt fit of a * exp(-(x - c)^2 / (2 w^2)); the reported
/// width w is where the curve falls to 1/sqrt(e) of its peak.
inline GaussianFit fit_gaussian_width(const std::vector<double>& coords,
                                      const std::vector<double>& values) {
  const std::size_t n = coords.size();
  if (n != values.size() || n < 5)
    throw std::invalid_argument("fit_gaussian_width: need >= 5 points");
  const double vmax = *std::max_element(values.begin(), values.end());
  if (!(vmax > 0.0)) throw std::invalid_argument("fit_gaussian_width: no positive values");
  const double span =
      *std::max_element(coords.begin(), coords.end()) - *std::min_element(coords.begin(), coords.end());

  // Moment-based start: weighted mean and spread of the positive part.
  double w_sum = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] > 0.0) {
      w_sum += values[i];
      m1 += values[i] * coords[i];
    }
  m1 /= w_sum;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] > 0.0) m2 += values[i] * (coords[i] - m1) * (coords[i] - m1);
  m2 /= w_sum;
  double a = vmax, c = m1, w = m2 > 0.0 ? std::sqrt(m2) : span / 4.0;
  if (w == 0.0) w = span / 4.0;

  auto ssr_of = [&](double pa, double pc, double pw) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = coords[i] - pc;
      const double r = pa * std::exp(-0.5 * d * d / (pw * pw)) - values[i];
      ssr += r * r;
    }
    return ssr;
  };

  double lambda = 1e-3;
  double ssr = ssr_of(a, c, w);
  int iter = 0;
  for (; iter < detail::kMaxFitIterations; ++iter) {
    double jtj[3][3] = {};
    double jtr[3] = {};
    for (std::size_t i = 0; i < n; ++i) {
      const double d = coords[i] - c;
      const double e = std::exp(-0.5 * d * d / (w * w));
      const double model = a * e;
      const double r = model - values[i];
      const double j[3] = {e, model * d / (w * w), model * d * d / (w * w * w)};
      for (int p = 0; p < 3; ++p) {
        jtr[p] += j[p] * r;
        for (int q = p; q < 3; ++q) jtj[p][q] += j[p] * j[q];
      }
    }
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < p; ++q) jtj[p][q] = jtj[q][p];

    double m[3][3];
    double rhs[3];
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) m[p][q] = jtj[p][q];
      m[p][p] *= 1.0 + lambda;
      rhs[p] = -jtr[p];
    }
    double step[3];
    bool singular = false;
    for (int col = 0; col < 3 && !singular; ++col) {
      int piv = col;
      for (int r2 = col + 1; r2 < 3; ++r2)
        if (std::abs(m[r2][col]) > std::abs(m[piv][col])) piv = r2;
      std::swap(m[col], m[piv]);
      std::swap(rhs[col], rhs[piv]);
      if (m[col][col] == 0.0) {
        singular = true;
        break;
      }
      for (int r2 = col + 1; r2 < 3; ++r2) {
        const double f = m[r2][col] / m[col][col];
        for (int k = col; k < 3; ++k) m[r2][k] -= f * m[col][k];
        rhs[r2] -= f * rhs[col];
      }
    }
    if (singular) {
      lambda *= 10.0;
      if (lambda > 1e12) throw NumericsError("fit_gaussian_width: normal equations singular");
      continue;
    }
    for (int r2 = 2; r2 >= 0; --r2) {
      double acc = rhs[r2];
      for (int k = r2 + 1; k < 3; ++k) acc -= m[r2][k] * step[k];
      step[r2] = acc / m[r2][r2];
    }

    const double a1 = a + step[0], c1 = c + step[1], w1 = std::abs(w + step[2]);
    if (!(w1 > 0.0) || !std::isfinite(a1) || !std::isfinite(c1) || !std::isfinite(w1) ||
        w1 > 1e3 * span)
      throw NumericsError("fit_gaussian_width: diverged (profile has no Gaussian peak)");
    const double ssr1 = ssr_of(a1, c1, w1);
    if (ssr1 <= ssr) {
      const double rel_step = std::abs(step[0] / (a1 != 0.0 ? a1 : 1.0)) +
                              std::abs(step[1] / span) + std::abs(step[2] / w1);
      const bool done = rel_step < 1e-13 || (ssr - ssr1) <= 1e-15 * ssr;
      a = a1;
      c = c1;
      w = w1;
      ssr = ssr1;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (done) return {w, c, a, iter + 1, std::sqrt(ssr / n)};
    } else {
      lambda *= 10.0;
      if (lambda > 1e12)
        throw NumericsError("fit_gaussian_width: no convergence (damping exhausted)");
    }
  }
  throw NumericsError("fit_gaussian_width: no convergence after " +
                      std::to_string(detail::kMaxFitIterations) + " iterations");
}

inline void write_profile_csv(const DensityProfile& prof, std::ostream& out) {
  out << "z_m,value\n";
  for (std::size_t i = 0; i < prof.z.size(); ++i)
    out << cfgio::format_g17(prof.z[i]) << ',' << cfgio::format_g17(prof.value[i]) << '\n';
}

}  // namespace evmirror
