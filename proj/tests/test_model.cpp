#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dpim/model.hpp"

using namespace dpim;

namespace {

Eigen::VectorXd rnd(int n, std::mt19937& gen) {
  std::uniform_real_distribution<double> d(-1, 1);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(gen);
  return v;
}

// Root of cos(x) cosh(x) = 1 near 4.73 by plain bisection.
double clamped_beta1() {
  auto f = [](double x) { return std::cos(x) * std::cosh(x) - 1; };
  double a = 4.5, b = 5.0;
  for (int i = 0; i < 200; ++i) {
    const double c = 0.5 * (a + b);
    (f(a) * f(c) <= 0 ? b : a) = c;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("parse a linear model") {
    const auto m = parse_model("[M]\n1 1 2\n2 2 1\n[K]\n1 1 4\n1 2 -1\n2 2 3\n[G]\n[H]\n");
    CHECK(m.N == 2);
    CHECK(m.K(1, 0) == doctest::Approx(-1));  // mirrored
    Eigen::VectorXd u(2);
    u << 0.3, -0.7;
    CHECK(eval_G<double>(m, u, u).norm() == 0);
    CHECK(eval_H<double>(m, u, u, u).norm() == 0);
    CHECK(m.C.norm() == 0);
  }

  TEST_CASE("one-dof file is the Duffing oscillator") {
    const auto m = parse_model("# duffing\n[M]\n1 1 1\n[C]\n1 1 0\n[K]\n1 1 1\n[H]\n1 1 1 1 1\n");
    Eigen::VectorXd u(1);
    u << 0.4;
    CHECK(eval_H<double>(m, u, u, u)[0] == doctest::Approx(0.064));
    CHECK(undamped_modes(m).omega[0] == doctest::Approx(1.0));
  }

  TEST_CASE("single quadratic entry is symmetrised") {
    const auto m = parse_model("[M]\n1 1 1\n2 2 1\n[K]\n1 1 1\n2 2 1\n[G]\n1 2 1 1.0\n");
    Eigen::VectorXd e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    const Eigen::VectorXd a = eval_G<double>(m, e2, e1), b = eval_G<double>(m, e1, e2);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(b[0] == doctest::Approx(0.5));
    CHECK(a[1] == 0);
    const Eigen::VectorXd u = e1 + e2;
    CHECK(eval_G<double>(m, u, u)[0] == doctest::Approx(1.0));
  }

  TEST_CASE("parse errors carry the line number") {
    try {
      parse_model("[M]\n1 1 1\n[K]\n1 1 x\n", "bad");
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("bad:4") != std::string::npos);
    }
    CHECK_THROWS(parse_model("[M]\n1 1 1\n[Q]\n"));
    CHECK_THROWS(parse_model("[M]\n1 1 -1\n[K]\n1 1 1\n"));          // not SPD
    CHECK_THROWS(parse_model("[M]\n1 1 1\n[K]\n1 1 1\n2 2 1\n"));    // dimension mismatch
    CHECK_THROWS(parse_model("[M]\n1 1 1\n[FORCING]\nfoo 1 1\n"));
    CHECK_THROWS(load_model("/nonexistent/file.model"));
  }

  TEST_CASE("tensor symmetry on random vectors") {
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> d(-1, 1);
    std::string text = "[M]\n1 1 1\n2 2 1\n3 3 1\n[K]\n1 1 1\n2 2 2\n3 3 3\n[G]\n";
    for (int k = 0; k < 8; ++k)
      text += std::to_string(gen() % 3 + 1) + " " + std::to_string(gen() % 3 + 1) + " " +
              std::to_string(gen() % 3 + 1) + " " + std::to_string(d(gen)) + "\n";
    text += "[H]\n";
    for (int k = 0; k < 10; ++k)
      text += std::to_string(gen() % 3 + 1) + " " + std::to_string(gen() % 3 + 1) + " " +
              std::to_string(gen() % 3 + 1) + " " + std::to_string(gen() % 3 + 1) + " " + std::to_string(d(gen)) +
              "\n";
    const auto m = parse_model(text);
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd u = rnd(3, gen), v = rnd(3, gen), w = rnd(3, gen);
      CHECK((eval_G<double>(m, u, v) - eval_G<double>(m, v, u)).norm() < 1e-14);
      CHECK((eval_G<double>(m, 2 * u, v) - 2 * eval_G<double>(m, u, v)).norm() < 1e-14);
      CHECK(eval_G<double>(m, Eigen::VectorXd::Zero(3), v).norm() == 0);
      const Eigen::VectorXd h = eval_H<double>(m, u, v, w);
      CHECK((h - eval_H<double>(m, v, u, w)).norm() < 1e-14);
      CHECK((h - eval_H<double>(m, w, v, u)).norm() < 1e-14);
      CHECK((h - eval_H<double>(m, u, w, v)).norm() < 1e-14);
      CHECK((h - eval_H<double>(m, v, w, u)).norm() < 1e-14);
      // Jacobian of G(q,q)+H(q,q,q) against central differences
      const Eigen::MatrixXd J = nonlinear_jacobian(m, u);
      for (int c = 0; c < 3; ++c) {
        const double hstep = 1e-6;
        Eigen::VectorXd up = u, um = u;
        up[c] += hstep;
        um[c] -= hstep;
        const Eigen::VectorXd fp = eval_G<double>(m, up, up) + eval_H<double>(m, up, up, up);
        const Eigen::VectorXd fm = eval_G<double>(m, um, um) + eval_H<double>(m, um, um, um);
        CHECK(((fp - fm) / (2 * hstep) - J.col(c)).norm() < 1e-8);
      }
    }
  }

  TEST_CASE("Duffing generator") {
    const auto m = builtin_duffing(1, 0.05, 0, 1);
    CHECK(m.C(0, 0) == doctest::Approx(0.1));
    Eigen::VectorXd u(1);
    u << 0.5;
    CHECK(eval_H<double>(m, u, u, u)[0] == doctest::Approx(0.125));
    const auto q = builtin_duffing(1, 0, 0.5, 1);
    CHECK(eval_G<double>(q, u, u)[0] == doctest::Approx(0.125));
    CHECK_THROWS(builtin_duffing(0, 0, 0, 0));
    CHECK_THROWS(builtin_duffing(1, -0.1, 0, 0));
  }

  TEST_CASE("simply supported beam spectrum and cubic coefficient") {
    const double L = 1.0, H = 0.01, B = 0.02, E = 70e9, rho = 2700;
    const auto m = builtin_vk_beam(3, L, H, B, E, rho, BeamBC::simply_supported);
    const auto modes = undamped_modes(m);
    CHECK(modes.omega[1] / modes.omega[0] == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(modes.omega[2] / modes.omega[0] == doctest::Approx(9.0).epsilon(1e-6));
    const double A = B * H, J = B * H * H * H / 12, pi = std::acos(-1.0);
    CHECK(modes.omega[0] == doctest::Approx(pi * pi / (L * L) * std::sqrt(E * J / (rho * A))).epsilon(1e-9));
    // single mode: phi = sqrt(2/(rho A L)) sin(pi x/L), k3 = EA/(2L) (int phi'^2)^2
    const auto m1 = builtin_vk_beam(1, L, H, B, E, rho, BeamBC::simply_supported);
    const double s11 = pi * pi / (rho * A * L * L);
    Eigen::VectorXd u(1);
    u << 1.0;
    CHECK(eval_H<double>(m1, u, u, u)[0] == doctest::Approx(E * A / (2 * L) * s11 * s11).epsilon(1e-8));
    CHECK(m1.phi_max == doctest::Approx(std::sqrt(2 / (rho * A * L))).epsilon(1e-8));
  }

  TEST_CASE("clamped beam fundamental frequency") {
    const double L = 0.8, H = 0.005, B = 0.01, E = 210e9, rho = 7800;
    const auto m = builtin_vk_beam(2, L, H, B, E, rho, BeamBC::clamped_clamped);
    const double b1 = clamped_beta1() / L;
    const double J = B * H * H * H / 12, A = B * H;
    CHECK(undamped_modes(m).omega[0] == doctest::Approx(b1 * b1 * std::sqrt(E * J / (rho * A))).epsilon(1e-6));
    // mass normalisation of the sampled shape, trapezoid rule
    double mass = 0;
    const int n = static_cast<int>(m.shape_grid.size());
    for (int i = 0; i + 1 < n; ++i)
      mass += 0.5 * (m.shape_grid[i + 1] - m.shape_grid[i]) *
              (m.shapes(i, 0) * m.shapes(i, 0) + m.shapes(i + 1, 0) * m.shapes(i + 1, 0));
    CHECK(rho * A * mass == doctest::Approx(1.0).epsilon(1e-4));
    CHECK_THROWS(builtin_vk_beam(0, L, H, B, E, rho, BeamBC::clamped_clamped));
    CHECK_THROWS(parse_bc("free"));
  }

  TEST_CASE("dimensionless cubic coefficient is invariant under geometric scaling") {
    auto invariant = [](double s) {
      const auto m = builtin_vk_beam(1, 1.0 * s, 0.01 * s, 0.02 * s, 210e9, 7800, BeamBC::clamped_clamped);
      Eigen::VectorXd u(1);
      u << 1.0;
      const double k3 = eval_H<double>(m, u, u, u)[0];
      return std::pow(m.L_CH / m.phi_max, 2) * k3 / m.K(0, 0);
    };
    CHECK(invariant(2.0) == doctest::Approx(invariant(1.0)).epsilon(1e-8));
    CHECK(invariant(0.3) == doctest::Approx(invariant(1.0)).epsilon(1e-8));
  }

  TEST_CASE("epsilon_load") {
    CHECK(epsilon_load(1, 1, 1, 1) == doctest::Approx(1));
    CHECK(epsilon_load(4, 0.1, 2, 2) == doctest::Approx(0.05));
    CHECK(epsilon_load(8, 0.1, 2, 2) == doctest::Approx(0.1));
    CHECK_THROWS(epsilon_load(0, 1, 1, 1));
  }

  TEST_CASE("generated models pass their own checks and export") {
    auto m = builtin_vk_beam(4, 1, 0.01, 0.01, 210e9, 7800, BeamBC::simply_supported);
    apply_rayleigh(m, 2.0, 1e-6);
    CHECK_NOTHROW(m.validate());
    CHECK(m.C(1, 1) == doctest::Approx(2.0 + 1e-6 * m.K(1, 1)));
    const auto dir = std::filesystem::temp_directory_path() / "dpim_export_test";
    std::filesystem::create_directories(dir);
    export_csv(m, dir.string());
    CHECK(std::filesystem::exists(dir / "K.csv"));
    CHECK(std::filesystem::exists(dir / "H.csv"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("forcing shape") {
    const auto m = parse_model("[M]\n1 1 2\n2 2 2\n[K]\n1 1 2\n2 2 8\n[FORCING]\nmode 2 3.0\nvector 1 0.5\n");
    const auto modes = undamped_modes(m);
    const Eigen::VectorXd F = forcing_shape(m);
    const Eigen::VectorXd expect = 3.0 * (m.M * modes.phi.col(1)) + Eigen::Vector2d(0.5, 0);
    CHECK((F - expect).norm() < 1e-14);
    CHECK(std::abs(modes.phi.col(0).dot(m.M * modes.phi.col(0)) - 1) < 1e-14);
  }
}
