#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "evmirror/imaging.hpp"
#include "evmirror/pgm_io.hpp"
#include "test_helpers.hpp"

using namespace evmirror;

namespace {

ImagingParams small_field() {
  ImagingParams im;
  im.pixels_x = 64;
  im.pixels_z = 48;
  im.field_x = 6.4e-3;
  im.field_z = 4.8e-3;
  im.origin_x = -3.2e-3;
  im.origin_z = 0.0;
  im.blur_rms = 0.0;
  im.region_x = 1e-3;
  im.region_z = 2e-3;
  return im;
}

AtomEnsemble atoms_at(const std::vector<Vec3>& positions) {
  AtomEnsemble ens;
  ens.positions = positions;
  ens.velocities.assign(positions.size(), {0, 0, 0});
  ens.is_condensed.assign(positions.size(), 0);
  return ens;
}

}  // namespace

TEST_CASE("single atom lands in exactly one pixel", "[imaging]") {
  const ImagingParams im = small_field();
  const AtomEnsemble ens = atoms_at({{0.05e-3, 0.0, 2.45e-3}});  // field center
  const AbsorptionImage img = render_image(ens, im);
  CHECK(img.dropped == 0);
  CHECK(img.sum() == 1.0);
  int nonzero = 0;
  for (double v : img.data) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(img.at(32, 24) == 1.0);
}

TEST_CASE("blur spreads a delta but conserves its weight", "[imaging]") {
  ImagingParams im = small_field();
  im.blur_rms = 1.0;
  const AtomEnsemble ens = atoms_at({{0.05e-3, 0.0, 2.45e-3}});
  const AbsorptionImage img = render_image(ens, im);
  CHECK(img.sum() == Catch::Approx(1.0).epsilon(1e-9));
  int nonzero = 0;
  for (double v : img.data) nonzero += v > 0.0;
  CHECK(nonzero > 20);           // spread over the kernel footprint
  CHECK(img.at(32, 24) > 0.1);   // still peaked at the source
  for (double v : img.data) CHECK(v >= 0.0);
}

TEST_CASE("reference field gives the documented pixel pitch", "[imaging]") {
  const SimulationConfig cfg = testutil::make_reference_config();
  CHECK(cfg.imaging.pitch_x() == Catch::Approx(11.1328125e-6).epsilon(1e-12));
  CHECK(cfg.imaging.pitch_z() == Catch::Approx(8.59375e-6).epsilon(1e-12));
}

TEST_CASE("binning conserves the atom count exactly", "[imaging]") {
  const ImagingParams im = small_field();
  std::vector<Vec3> pos;
  rng::Stream st(77, 0, rng::Purpose::kSamplePosition);
  for (int i = 0; i < 50000; ++i)
    pos.push_back({(st.uniform() - 0.5) * 10e-3, 0.0, st.uniform() * 6e-3});  // some outside
  const AtomEnsemble ens = atoms_at(pos);
  const AbsorptionImage img = render_image(ens, im);
  CHECK(img.dropped > 0);
  CHECK(img.sum() + static_cast<double>(img.dropped) == 50000.0);

  SECTION("blur changes the sum by less than 1e-9 relative") {
    ImagingParams blurred = im;
    blurred.blur_rms = 1.5;
    const AbsorptionImage b = render_image(ens, blurred);
    CHECK(b.sum() == Catch::Approx(img.sum()).epsilon(1e-9));
  }

  SECTION("thread count does not change the image") {
    const AbsorptionImage b = render_image(ens, im, 4);
    REQUIRE(b.data == img.data);
    CHECK(b.dropped == img.dropped);
  }
}

TEST_CASE("pixel calibration recovers the pitch from a fall track", "[imaging]") {
  PhysicalConstants pc;
  const double pitch = 8.59375e-6;
  std::vector<std::pair<double, double>> track;
  for (int k = 0; k < 6; ++k) {
    const double t = 0.01 * k;
    track.push_back({t, 0.5 * pc.g * t * t / pitch});
  }
  const PixelCalibration cal = calibrate_pixel_size(track, pc);
  CHECK(cal.pitch == Catch::Approx(pitch).epsilon(1e-3));
  CHECK(cal.rms_residual < 1e-6);

  SECTION("an initial-velocity term is absorbed by the linear coefficient") {
    for (auto& [t, row] : track) row += 0.12 * t / pitch;
    const PixelCalibration cal2 = calibrate_pixel_size(track, pc);
    CHECK(cal2.pitch == Catch::Approx(pitch).epsilon(1e-3));
  }

  SECTION("degenerate times are rejected") {
    std::vector<std::pair<double, double>> degenerate = {{0.0, 0.0}, {0.0, 1.0}, {0.01, 5.0}};
    CHECK_THROWS_AS(calibrate_pixel_size(degenerate, pc), std::invalid_argument);
  }

  SECTION("a non-falling track is rejected") {
    std::vector<std::pair<double, double>> rising;
    for (int k = 0; k < 6; ++k) {
      const double t = 0.01 * k;
      rising.push_back({t, -0.5 * pc.g * t * t / pitch});
    }
    CHECK_THROWS_AS(calibrate_pixel_size(rising, pc), NumericsError);
  }
}

TEST_CASE("z-profile extraction normalizes and finds the peak", "[imaging]") {
  const ImagingParams im = small_field();

  SECTION("uniform image gives a flat unit profile") {
    AtomEnsemble one = atoms_at({{0.05e-3, 0.0, 2.45e-3}});
    AbsorptionImage img = render_image(one, im);
    for (double& v : img.data) v = 3.5;
    const DensityProfile prof = extract_z_profile(img, 1e-3, 2e-3);
    for (double v : prof.value) CHECK(v == 1.0);
    for (std::size_t i = 1; i < prof.z.size(); ++i) CHECK(prof.z[i] > prof.z[i - 1]);
  }

  SECTION("gaussian spot peaks at the spot's z") {
    AtomEnsemble one = atoms_at({{0.05e-3, 0.0, 2.45e-3}});
    AbsorptionImage img = render_image(one, im);
    std::fill(img.data.begin(), img.data.end(), 0.0);
    const double z_spot = 1.8e-3;
    for (int iz = 0; iz < im.pixels_z; ++iz)
      for (int ix = 0; ix < im.pixels_x; ++ix) {
        const double dz = (img.center_z(iz) - z_spot) / 0.3e-3;
        const double dx = img.center_x(ix) / 0.5e-3;
        img.at(ix, iz) = std::exp(-0.5 * (dx * dx + dz * dz));
      }
    const DensityProfile prof = extract_z_profile(img, 2e-3, 3e-3);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < prof.value.size(); ++i)
      if (prof.value[i] > prof.value[peak]) peak = i;
    CHECK(std::abs(prof.z[peak] - z_spot) <= img.pitch_z);
    CHECK(prof.value[peak] == 1.0);

    SECTION("profile is invariant under image-wide scaling") {
      AbsorptionImage scaled = img;
      for (double& v : scaled.data) v *= 7.0;
      const DensityProfile prof2 = extract_z_profile(scaled, 2e-3, 3e-3);
      REQUIRE(prof2.value.size() == prof.value.size());
      for (std::size_t i = 0; i < prof.value.size(); ++i)
        CHECK(prof2.value[i] == Catch::Approx(prof.value[i]).margin(1e-12));
    }
  }

  SECTION("all-zero and out-of-field regions are rejected") {
    AtomEnsemble one = atoms_at({{0.05e-3, 0.0, 2.45e-3}});
    AbsorptionImage img = render_image(one, im);
    std::fill(img.data.begin(), img.data.end(), 0.0);
    CHECK_THROWS_AS(extract_z_profile(img, 1e-3, 1e-3), NumericsError);
    img.at(3, 3) = 1.0;
    CHECK_THROWS_AS(extract_z_profile(img, 1e-3, 1e-3, 50e-3, 50e-3), std::invalid_argument);
  }
}

TEST_CASE("gaussian width fit", "[imaging]") {
  SECTION("recovers an exact gaussian to machine-level accuracy") {
    std::vector<double> xs, ys;
    for (int i = 0; i <= 100; ++i) {
      const double x = static_cast<double>(i);
      xs.push_back(x);
      ys.push_back(2.5 * std::exp(-0.5 * (x - 47.0) * (x - 47.0) / 100.0));
    }
    const GaussianFit fit = fit_gaussian_width(xs, ys);
    CHECK(fit.width == Catch::Approx(10.0).epsilon(1e-6));
    CHECK(fit.center == Catch::Approx(47.0).epsilon(1e-6));
    CHECK(fit.amplitude == Catch::Approx(2.5).epsilon(1e-6));

    SECTION("and is translation-equivariant") {
      std::vector<double> xs2 = xs;
      for (double& x : xs2) x += 13.25;
      const GaussianFit fit2 = fit_gaussian_width(xs2, ys);
      CHECK(fit2.width == Catch::Approx(fit.width).epsilon(1e-9));
      CHECK(fit2.center - fit.center == Catch::Approx(13.25).epsilon(1e-9));
    }
  }

  SECTION("flat input does not converge") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 32; ++i) {
      xs.push_back(i);
      ys.push_back(1.0);
    }
    CHECK_THROWS_AS(fit_gaussian_width(xs, ys), NumericsError);
  }

  SECTION("input validation") {
    CHECK_THROWS_AS(fit_gaussian_width({0, 1, 2}, {1, 2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(fit_gaussian_width({0, 1, 2, 3, 4}, {0, 0, 0, 0, 0}), std::invalid_argument);
  }
}

TEST_CASE("pgm round trip preserves geometry and quantized values", "[imaging]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "evm_pgm_test";
  fs::create_directories(dir);
  const std::string path = (dir / "img.pgm").string();

  AbsorptionImage img;
  img.pixels_x = 7;
  img.pixels_z = 5;
  img.data.assign(35, 0.0);
  img.pitch_x = 11.1328125e-6;
  img.pitch_z = 8.59375e-6;
  img.origin_x = -1e-3;
  img.origin_z = 0.5e-3;
  img.time = 59e-3;
  img.dropped = 3;
  for (int k = 0; k < 35; ++k) img.data[k] = k * 0.25;

  write_image_pgm(img, path);
  const AbsorptionImage back = read_image_pgm(path);
  CHECK(back.pixels_x == img.pixels_x);
  CHECK(back.pixels_z == img.pixels_z);
  CHECK(back.pitch_x == img.pitch_x);
  CHECK(back.pitch_z == img.pitch_z);
  CHECK(back.origin_x == img.origin_x);
  CHECK(back.origin_z == img.origin_z);
  CHECK(back.time == img.time);
  CHECK(back.dropped == img.dropped);
  const double peak = 34 * 0.25;
  for (int k = 0; k < 35; ++k)
    CHECK(back.data[k] == Catch::Approx(img.data[k]).margin(peak * 0.5 / 65535.0 + 1e-12));

  SECTION("corrupted magic is reported with its byte offset") {
    std::ofstream bad(path, std::ios::binary);
    bad << "P2\n7 5\n65535\n";
    bad.close();
    try {
      read_image_pgm(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("byte 0") != std::string::npos);
    }
  }

  SECTION("truncated pixel payload is reported") {
    write_image_pgm(img, path);
    fs::resize_file(path, fs::file_size(path) - 10);
    try {
      read_image_pgm(path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("poisson noise is optional, deterministic and mean-preserving", "[imaging]") {
  AbsorptionImage img;
  img.pixels_x = 50;
  img.pixels_z = 40;
  img.data.assign(2000, 100.0);
  AbsorptionImage noisy = img;
  apply_poisson_noise(noisy, 11);
  AbsorptionImage noisy2 = img;
  apply_poisson_noise(noisy2, 11);
  REQUIRE(noisy.data == noisy2.data);

  double mean = 0.0, var = 0.0;
  for (double v : noisy.data) mean += v;
  mean /= noisy.data.size();
  for (double v : noisy.data) var += (v - mean) * (v - mean);
  var /= noisy.data.size();
  CHECK(mean == Catch::Approx(100.0).epsilon(0.02));
  CHECK(var == Catch::Approx(100.0).epsilon(0.2));
  bool changed = false;
  for (std::size_t k = 0; k < img.data.size(); ++k) changed |= noisy.data[k] != img.data[k];
  CHECK(changed);
}
