#include <doctest.h>

#include <cmath>

#include "dpim/oracle.hpp"

using namespace dpim;

namespace {

double analytic_linear(double xi, double Omega, double eps) {
  return eps / std::abs(std::complex<double>(1 - Omega * Omega, 2 * xi * Omega));
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("linear harmonic balance matches the transfer function") {
    const double xi = 0.05, eps = 0.01;
    const auto m = builtin_duffing(1, xi, 0, 0);
    FullOracleOptions opt;
    opt.hb.H = 3;
    const auto br = hbm_full(m, 0.5, 1.5, eps, opt);
    REQUIRE(br.points.size() > 10);
    for (const auto& p : br.points) CHECK(std::abs(p.amplitude - analytic_linear(xi, p.omega, eps)) < 1e-8);
    CHECK(std::abs(linear_frf(m, 0.8, eps)[0]) == doctest::Approx(analytic_linear(xi, 0.8, eps)).epsilon(1e-12));
  }

  TEST_CASE("first-order field matches the model forces") {
    const auto m = load_model(std::string(DPIM_DATA_DIR) + "/twodof_quadratic.model");
    const auto sys = full_system(m, 0.3);
    Eigen::VectorXd x(4), f, fp, fm;
    x << 0.2, -0.1, 0.05, 0.3;
    Eigen::MatrixXd J;
    sys.field(x, 0.8, 1.0, f, &J);
    const Eigen::VectorXd q = x.head(2), v = x.tail(2);
    const Eigen::VectorXd rhs = 0.3 * forcing_shape(m) * std::cos(0.8) - m.C * v - m.K * q -
                                eval_G<double>(m, q, q) - eval_H<double>(m, q, q, q);
    CHECK((f.head(2) - v).norm() == 0);
    CHECK((m.M * f.tail(2) - rhs).norm() < 1e-14);
    for (int c = 0; c < 4; ++c) {
      Eigen::VectorXd xp = x, xm = x;
      xp[c] += 1e-6;
      xm[c] -= 1e-6;
      sys.field(xp, 0.8, 1.0, fp, nullptr);
      sys.field(xm, 0.8, 1.0, fm, nullptr);
      CHECK(((fp - fm) / 2e-6 - J.col(c)).norm() < 1e-8);
    }
  }

  TEST_CASE("zero forcing gives the zero branch") {
    const auto m = builtin_duffing(1, 0.02, 0.5, 1);
    FullOracleOptions opt;
    opt.hb.H = 3;
    const auto br = hbm_full(m, 0.8, 1.2, 0.0, opt);
    for (const auto& p : br.points) CHECK(p.amplitude < 1e-14);
  }

  TEST_CASE("Duffing peak agrees with multiple scales") {
    const double xi = 0.01, eps = 0.002;
    const auto m = builtin_duffing(1, xi, 0, 1);
    FullOracleOptions opt;
    opt.hb.H = 5;
    const auto [a, w] = hbm_full(m, 0.95, 1.1, eps, opt).peak();
    const MultipleScales ms{1, xi, 0, 1};
    const double a_ms = eps / (2 * xi);
    CHECK(a == doctest::Approx(a_ms).epsilon(0.01));
    CHECK(w == doctest::Approx(ms.backbone(a_ms)).epsilon(0.01));
    const auto br = ms.primary(eps, ms.backbone(a_ms));
    REQUIRE_FALSE(br.empty());
    CHECK(*std::max_element(br.begin(), br.end()) == doctest::Approx(a_ms).epsilon(1e-3));
  }

  TEST_CASE("harmonic truncation convergence") {
    const auto m = builtin_duffing(1, 0.002, 0, 1);
    FullOracleOptions opt;
    opt.hb.H = 7;
    const double p7 = hbm_full(m, 0.325, 0.36, 0.131, opt).peak().first;
    opt.hb.H = 9;
    const double p9 = hbm_full(m, 0.325, 0.36, 0.131, opt).peak().first;
    CHECK(std::abs(p9 - p7) < 0.005 * p9);
  }

  TEST_CASE("time integration against the transfer function and harmonic balance") {
    const double xi = 0.05, eps = 0.01;
    TimeIntegrationOptions to;
    const auto lin = time_integrate_full(builtin_duffing(1, xi, 0, 0), 0.9, eps, to);
    CHECK(lin.settled);
    CHECK(lin.amplitude == doctest::Approx(analytic_linear(xi, 0.9, eps)).epsilon(0.005));

    const auto m = builtin_duffing(1, 0.01, 0, 1);
    FullOracleOptions opt;
    opt.hb.H = 5;
    const auto br = hbm_full(m, 0.9, 0.99, 0.002, opt);
    const double hb = br.points.back().amplitude;
    CHECK(time_integrate_full(m, br.points.back().omega, 0.002, to).amplitude == doctest::Approx(hb).epsilon(0.01));

    Eigen::VectorXd q0(2);
    q0 << 0.1, 0;
    CHECK(time_integrate_full(builtin_duffing(1, xi, 0, 1), 1.0, 0.0, to, &q0).amplitude < 1e-6);
  }

  TEST_CASE("harmonic balance and time integration agree on the shipped models") {
    auto beam = builtin_vk_beam(10, 1.0, 0.01, 0.01, 210e9, 7800, BeamBC::clamped_clamped);
    const double w1 = undamped_modes(beam).omega[0];
    apply_rayleigh(beam, w1 / 500, 0);
    struct Case {
      MechModel m;
      double lo, hi, eps;
    };
    const Case cases[] = {{load_model(std::string(DPIM_DATA_DIR) + "/twodof_quadratic.model"), 0.9, 1.1, 0.25},
                          {beam, 0.95 * w1, 1.3 * w1, 0.5}};
    for (const auto& c : cases) {
      const auto br = hbm_full(c.m, c.lo, c.hi, c.eps, FullOracleOptions{});
      const auto [pa, pw] = br.peak();
      // a stable point on the rising flank and one past the resonance
      for (double w : {c.lo + 0.5 * (pw - c.lo), c.hi}) {
        const FRCPoint* best = nullptr;
        for (const auto& p : br.points)
          if (!p.fold && (!best || std::abs(p.omega - w) < std::abs(best->omega - w))) best = &p;
        REQUIRE(best);
        TimeIntegrationOptions to;
        const auto ss = time_integrate_full(c.m, best->omega, c.eps, to);
        CHECK(ss.settled);
        CHECK(ss.amplitude == doctest::Approx(best->amplitude).epsilon(0.01));
      }
    }
  }

  TEST_CASE("effective cubic coefficient") {
    CHECK(MultipleScales{1, 0, 0, 1}.gamma() == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(MultipleScales{2, 0, 0, 1}.gamma() == doctest::Approx(3.0 / 16).epsilon(1e-12));
    CHECK(MultipleScales{1, 0, 0.5, 0}.gamma() < 0);
    CHECK(MultipleScales{1, 0, 0.5, 1}.gamma() == doctest::Approx(0.375 - 5.0 / 48).epsilon(1e-12));
    CHECK(MultipleScales{1, 0, 0, 0}.gamma() == 0);
  }

  TEST_CASE("detuning cubic roots satisfy the cubic") {
    const double G = 0.375, s = 0.05, mu = 0.01, F = 0.005;
    const auto a = detuning_cubic_amplitudes(G, s, mu, F);
    REQUIRE_FALSE(a.empty());
    for (double x : a) {
      const double u = x * x;
      CHECK(std::abs(G * G * u * u * u - 2 * s * G * u * u + (mu * mu + s * s) * u - F * F) < 1e-14);
    }
  }

  TEST_CASE("oversized models are rejected") {
    const auto m = builtin_duffing(1, 0.01, 0, 1);
    FullOracleOptions opt;
    opt.hb.H = 9;
    opt.max_unknowns = 10;
    CHECK_THROWS(hbm_full(m, 0.9, 1.1, 0.01, opt));
  }
}
