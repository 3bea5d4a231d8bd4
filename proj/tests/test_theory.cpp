#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "evmirror/quadrature.hpp"
#include "evmirror/theory.hpp"
#include "test_helpers.hpp"

using namespace evmirror;

TEST_CASE("adaptive quadrature handles smooth and peaked integrands", "[theory]") {
  CHECK(integrate_adaptive([](double x) { return std::sin(x); }, 0.0, kPi).value ==
        Catch::Approx(2.0).epsilon(1e-12));
  CHECK(integrate_adaptive([](double x) { return x * x; }, -1.0, 2.0).value ==
        Catch::Approx(3.0).epsilon(1e-12));
  // Narrow Lorentzian; antiderivative is atan((x - 5)/w)/w.
  const double w = 1e-3;
  const double exact = 2.0 * std::atan(5.0 / w) / w;
  const QuadratureResult peaked = integrate_adaptive(
      [w](double x) {
        const double d = x - 5.0;
        return 1.0 / (d * d + w * w);
      },
      0.0, 10.0);
  CHECK(peaked.value == Catch::Approx(exact).epsilon(1e-9));
  CHECK(peaked.intervals > 1);
  CHECK(peaked.error_estimate < 1e-6 * peaked.value);
}

TEST_CASE("angular integrals match closed forms at alpha = 2", "[theory]") {
  // With exponent alpha/2 = 1 the integrand denominator is a - b cos(phi)
  // with a = 1 + eta^2, b = 2 eta, and every weight reduces to the textbook
  // integrals of cos^n/(a - b cos) over [0, pi].
  const double eta = 1.66;
  const double a = 1.0 + eta * eta;
  const double b = 2.0 * eta;
  const double root = std::sqrt(a * a - b * b);

  const double unit = angular_integral(AngularWeight::kUnitWeight, 2.0, eta);
  CHECK(unit == Catch::Approx(kPi / root).epsilon(1e-9));

  const double iy2 = angular_integral(AngularWeight::kYWeight, 2.0, eta);
  CHECK(iy2 == Catch::Approx(kPi / (b * b) * (a - root)).epsilon(1e-9));

  const double i0 = kPi / root;          // n = 0
  const double i1 = (a * i0 - kPi) / b;  // n = 1
  const double i2 = a * i1 / b;          // n = 2, using int_0^pi cos = 0
  const double ix2 = angular_integral(AngularWeight::kXWeight, 2.0, eta);
  CHECK(ix2 == Catch::Approx(i2 - 2.0 * eta * i1 + eta * eta * i0).epsilon(1e-9));
}

TEST_CASE("angular integrals at the reference operating point", "[theory]") {
  const double eta = 1.66;
  const double i1 = angular_integral(AngularWeight::kUnitWeight, 4.0, eta);
  const double iy = angular_integral(AngularWeight::kYWeight, 4.0, eta);
  const double ix = angular_integral(AngularWeight::kXWeight, 4.0, eta);
  CHECK(i1 == Catch::Approx(2.1804819029175437).epsilon(1e-9));
  CHECK(iy == Catch::Approx(0.3246968899064492).epsilon(1e-9));
  CHECK(ix == Catch::Approx(1.4647726097459735).epsilon(1e-9));

  // (cos - eta)^2 + sin^2 = 1 + eta^2 - 2 eta cos cancels one power of the
  // denominator, so Ix(alpha) + Iy(alpha) = I1(alpha - 2).
  CHECK(ix + iy ==
        Catch::Approx(angular_integral(AngularWeight::kUnitWeight, 2.0, eta)).epsilon(1e-9));

  SECTION("bad arguments are rejected") {
    CHECK_THROWS_AS(angular_integral(AngularWeight::kUnitWeight, 4.0, -0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(angular_integral(AngularWeight::kUnitWeight, 4.0, 1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(angular_integral(AngularWeight::kUnitWeight, -1.0, 1.66),
                    std::invalid_argument);
  }
}

TEST_CASE("anisotropy ratio", "[theory]") {
  SECTION("frozen value at the reference operating point") {
    const AnisotropyResult r = anisotropy_chi(4.0, 1.66);
    CHECK(r.chi == Catch::Approx(2.1239585683341375).epsilon(1e-9));
    CHECK(r.numerator_integral == Catch::Approx(1.4647726097459735).epsilon(1e-9));
    CHECK(r.denominator_integral == Catch::Approx(0.3246968899064492).epsilon(1e-9));
    CHECK(r.alpha == 4.0);
    CHECK(r.eta == 1.66);
  }

  SECTION("closed form agrees with quadrature at alpha = 4") {
    for (double eta : {1.1, 1.66, 2.5}) {
      const double closed = chi_alpha4_closed_form(eta);
      const double quad = anisotropy_chi(4.0, eta).chi;
      CHECK(closed == Catch::Approx(quad).epsilon(1e-8));
    }
    CHECK_THROWS_AS(chi_alpha4_closed_form(0.7), std::invalid_argument);
  }

  SECTION("smooth specular limit: eta -> 0 makes the kick isotropic") {
    const double ix0 = angular_integral(AngularWeight::kXWeight, 4.0, 0.0);
    const double iy0 = angular_integral(AngularWeight::kYWeight, 4.0, 0.0);
    CHECK(ix0 == Catch::Approx(kPi / 2.0).epsilon(1e-9));
    CHECK(iy0 == Catch::Approx(kPi / 2.0).epsilon(1e-9));
    CHECK(anisotropy_chi(4.0, 0.0).chi == Catch::Approx(1.0).epsilon(1e-9));
  }

  SECTION("chi(alpha) curve over the supported exponent range") {
    const double eta = 1.66;
    double lo = 1e300, hi = -1e300;
    double chi3 = 0.0;
    for (double alpha : {2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0}) {
      const double c = anisotropy_chi(alpha, eta).chi;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
      if (alpha == 3.0) chi3 = c;
    }
    CHECK(lo == Catch::Approx(2.0537596124669335).epsilon(1e-8));
    CHECK(hi == Catch::Approx(2.3076977119592184).epsilon(1e-8));
    CHECK(chi3 == lo);  // shallow minimum at alpha = 3

    // The curve is symmetric about its minimum: chi(3 + d) = chi(3 - d).
    for (double d : {0.25, 0.5, 1.0}) {
      const double plus = anisotropy_chi(3.0 + d, eta).chi;
      const double minus = anisotropy_chi(3.0 - d, eta).chi;
      CHECK(plus == Catch::Approx(minus).epsilon(1e-8));
    }
    for (double e2 : {1.2, 2.0}) {
      CHECK(anisotropy_chi(3.75, e2).chi ==
            Catch::Approx(anisotropy_chi(2.25, e2).chi).epsilon(1e-8));
    }
  }
}

TEST_CASE("diffuse-fraction bound and horizontal velocity spread", "[theory]") {
  const double sigma_s = 3.3e-9;
  const double kappa = 1.0 / 93.8e-9;
  const double lambda_db = 17.275929664169105e-9;

  SECTION("frozen value for the documented evanescent-wave extent") {
    const WmaxBound b = wmax_bound(sigma_s, kappa, 132e-9, lambda_db);
    CHECK(b.value == Catch::Approx(96.1360).epsilon(1e-3));
    CHECK(b.exceeds_unity);
  }

  SECTION("zero roughness scatters nothing") {
    const WmaxBound b = wmax_bound(0.0, kappa, 132e-9, lambda_db);
    CHECK(b.value == 0.0);
    CHECK_FALSE(b.exceeds_unity);
  }

  SECTION("exact algebra of the prefactor") {
    // sigma_s = lambda_dB/(4 pi) and z0 = 0 make the bound exactly 1.
    const WmaxBound b = wmax_bound(lambda_db / (4.0 * kPi), kappa, 0.0, lambda_db);
    CHECK(b.value == Catch::Approx(1.0).epsilon(1e-12));
  }

  SECTION("argument validation") {
    CHECK_THROWS_AS(wmax_bound(-1e-9, kappa, 0.0, lambda_db), std::invalid_argument);
    CHECK_THROWS_AS(wmax_bound(sigma_s, 0.0, 0.0, lambda_db), std::invalid_argument);
    CHECK_THROWS_AS(wmax_bound(sigma_s, kappa, -1e-9, lambda_db), std::invalid_argument);
    CHECK_THROWS_AS(wmax_bound(sigma_s, kappa, 0.0, 0.0), std::invalid_argument);
  }

  SECTION("sigma_vx scales as v_rec sqrt(wmax Ix / I1)") {
    const double v_rec = 5.886370262134483e-3;
    const double s1 = sigma_vx_bound(1.0, 4.0, 1.66, v_rec);
    CHECK(s1 / v_rec == Catch::Approx(0.8196130447387306).epsilon(1e-9));
    const double s4 = sigma_vx_bound(4.0, 4.0, 1.66, v_rec);
    CHECK(s4 == Catch::Approx(2.0 * s1).epsilon(1e-12));
    CHECK_THROWS_AS(sigma_vx_bound(-1.0, 4.0, 1.66, v_rec), std::invalid_argument);
  }
}

TEST_CASE("derived kinematics of the reference drop", "[theory]") {
  const SimulationConfig cfg = testutil::make_reference_config();
  EnsembleParams ens = cfg.ensemble;
  ens.h0 = 3.6e-3;  // nominal drop height for the timing numbers
  ens.v0 = {0.0, 0.0, 0.0};
  const DerivedKinematics kin = derived_kinematics(ens, cfg.constants);
  CHECK(kin.fall_time == Catch::Approx(27.091418459143853e-3).epsilon(1e-12));
  CHECK(kin.impact_velocity == Catch::Approx(0.26576681508420125).epsilon(1e-12));
  CHECK(kin.lambda_dB == Catch::Approx(17.275929664169105e-9).epsilon(1e-9));
  CHECK(kin.V_x_castin_dum == Catch::Approx(0.893640310280224e-3).epsilon(1e-9));

  SECTION("speckle size for a given illuminated radius") {
    const DerivedKinematics k2 = derived_kinematics(ens, cfg.constants, 100e-6);
    CHECK(k2.speckle_size == Catch::Approx(0.6219334679100877e-6).epsilon(1e-9));
  }
}
