#include <doctest.h>

#include <cmath>
#include <random>

#include "dpim/parametrisation.hpp"

using namespace dpim;

namespace {

// Three dofs, random SPD M and K, Rayleigh damping, random quadratic and cubic tensors.
MechModel random_model(unsigned seed, bool forced = true) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  const int n = 3;
  Eigen::MatrixXd A(n, n), B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      A(i, j) = d(gen);
      B(i, j) = d(gen);
    }
  MechModel m;
  m.name = "random3";
  m.N = n;
  m.M = 0.3 * A * A.transpose() + Eigen::MatrixXd::Identity(n, n);
  m.K = B * B.transpose() + 2 * Eigen::MatrixXd::Identity(n, n);
  apply_rayleigh(m, 0.01, 0.002);
  std::vector<Entry3> g;
  std::vector<Entry4> h;
  for (int t = 0; t < 6; ++t) g.push_back({int(gen() % n), int(gen() % n), int(gen() % n), 0.5 * d(gen)});
  for (int t = 0; t < 8; ++t)
    h.push_back({int(gen() % n), int(gen() % n), int(gen() % n), int(gen() % n), 0.5 * d(gen)});
  m.G = symmetrise_G(g);
  m.H = symmetrise_H(h);
  if (forced) m.forcing = {{ForcingTerm::Kind::mode, 0, 1.0}, {ForcingTerm::Kind::vector, 2, 0.3}};
  m.validate();
  return m;
}

Parametrisation param(const MechModel& m, const std::vector<int>& masters, Style style, TruncationRule rule,
                      double Omega, int threads = 1) {
  ParamOptions opt;
  opt.style = style;
  opt.rule = rule;
  opt.Omega = Omega;
  opt.threads = threads;
  return compute_parametrisation<double>(m, solve_real_mode_basis<double>(m, masters), opt);
}

double rel(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

// Least-squares slope of log(residual) against log(rho).
double fitted_slope(const std::vector<double>& rho, const std::vector<double>& r) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double x = std::log10(rho[i]), y = std::log10(r[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double residual_slope(const Parametrisation& P, bool scale_eps) {
  std::vector<ResidualSample<double>> s;
  std::vector<double> rho;
  const int n = P.basis.n;
  for (int k = 0; k <= 8; ++k) {
    const double r = std::pow(10.0, -2.5 + 1.5 * k / 8);
    ResidualSample<double> x;
    x.z.resize(2 * n);
    for (int j = 0; j < n; ++j) {
      x.z[j] = r * cd(std::cos(0.3 + j), std::sin(0.3 + j));
      x.z[j + n] = std::conj(x.z[j]);
    }
    x.phase = 0.7;
    x.eps = scale_eps ? r : 0.0;
    s.push_back(x);
    rho.push_back(r);
  }
  return fitted_slope(rho, invariance_residual(P, s));
}

}  // namespace

TEST_SUITE("parametrisation") {
  TEST_CASE("sigma") {
    const auto b = solve_real_mode_basis<double>(builtin_duffing(1, 0, 0, 1), {0});
    CHECK(std::abs(sigma<double>({1, 0, 0, 0}, b, 0.4) - b.lambda[0]) < 1e-15);
    CHECK(std::abs(sigma<double>({0, 0, 3, 0}, b, 0.4) - cd(0, 1.2)) < 1e-15);
    CHECK(std::abs(sigma<double>({2, 1, 0, 0}, b, 0.4) - b.lambda[0]) < 1e-15);
    CHECK(std::abs(sigma<double>({0, 0, 1, 2}, b, 0.4) - cd(0, -0.4)) < 1e-15);
  }

  TEST_CASE("resonance sets") {
    const auto b = solve_real_mode_basis<double>(builtin_duffing(1, 0.001, 0, 1), {0});
    const MultiIndex cube{0, 0, 3, 0};
    auto r = resonance_set<double>(cube, b, 1.0 / 3, Style::cnf, 0.1);
    REQUIRE(r.members.size() == 1);
    CHECK(r.members[0] == 0);
    CHECK(r.reasons[0] == Reason::near_resonant);
    CHECK(resonance_set<double>(cube, b, 0.25, Style::cnf, 0.1).members.empty());
    const auto g = resonance_set<double>({3, 0, 0, 0}, b, 0.25, Style::graph, 0.1);
    CHECK(g.members == std::vector<int>{0, 1});
    const auto t = resonance_set<double>({2, 1, 0, 0}, b, 0.25, Style::cnf, 0.1);
    REQUIRE(t.members.size() == 1);
    CHECK(t.reasons[0] == Reason::exact_trivial);
    const auto rn = resonance_set<double>({2, 1, 0, 0}, b, 0.25, Style::rnf, 0.1);
    CHECK(rn.members == std::vector<int>{0, 1});
    CHECK_THROWS(resonance_set<double>(cube, b, 0.25, Style::cnf, 0.0));
  }

  TEST_CASE("heavily damped resonance is flagged") {
    const auto b = solve_real_mode_basis<double>(builtin_duffing(1, 0.3, 0, 1), {0});
    CHECK(resonance_set<double>({0, 0, 1, 0}, b, b.lambda[0].imag(), Style::cnf, 0.1).real_part_flag);
  }

  TEST_CASE("order one without forcing") {
    auto m = builtin_duffing(1, 0.01, 0, 1);
    m.forcing.clear();
    const auto P = param(m, {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 1.0);
    for (int j : {P.plus_var(), P.minus_var()}) {
      const auto* e = P.find(unit_index(P.n_vars(), j));
      REQUIRE(e);
      CHECK(e->Psi.norm() == 0);
      CHECK(e->f.norm() == 0);
    }
  }

  TEST_CASE("order one, non-resonant forcing") {
    const double xi = 0.01, W = 0.3;
    const auto P = param(builtin_duffing(1, xi, 0, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, W);
    const auto* e = P.find({0, 0, 1, 0});
    REQUIRE(e);
    const cd expect = 0.5 / cd(1 - W * W, 2 * xi * W);
    CHECK(std::abs(e->Psi[0] - expect) < 1e-14);
    CHECK(e->f.norm() == 0);
    CHECK(std::abs(e->Ups[0] - cd(0, W) * expect) < 1e-14);
    // tangency of the autonomous block
    const auto* z1 = P.find({1, 0, 0, 0});
    CHECK(std::abs(z1->Psi[0] - P.basis.YU(0, 0)) == 0);
    CHECK(std::abs(z1->f[0] - P.basis.lambda[0]) == 0);
    CHECK(std::abs(z1->f[1]) == 0);
  }

  TEST_CASE("order one, primary resonance") {
    const auto P = param(builtin_duffing(1, 0.005, 0, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 1.0);
    const auto* e = P.find({0, 0, 1, 0});
    REQUIRE(e);
    CHECK(std::abs(e->f[0]) > 0.1);
    const auto& b = P.basis;
    const Eigen::MatrixXcd M = P.model.M.cast<cd>();
    REQUIRE(e->R_set == std::vector<int>{0});
    for (int r : e->R_set) {
      const cd k = b.XV.col(r).dot(M * e->Ups) + b.XU.col(r).dot(M * e->Psi);
      CHECK(std::abs(k) < 1e-12);
    }
  }

  TEST_CASE("right-hand side examples") {
    const auto P = param(builtin_duffing(1, 0.01, 0, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 0.3);
    Eigen::VectorXcd nu, mu;
    assemble_rhs(P, {3, 0, 0, 0}, nu, mu);
    CHECK(std::abs(nu[0] - cd(-1)) < 1e-15);
    CHECK(mu.norm() == 0);

    const double g = 0.5;
    const auto Q = param(builtin_duffing(1, 0.01, g, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 0.3);
    assemble_rhs(Q, {1, 0, 1, 0}, nu, mu);
    const cd psi_plus = Q.find({0, 0, 1, 0})->Psi[0];
    CHECK(std::abs(nu[0] - (-2 * g * psi_plus)) < 1e-15);
    CHECK(mu.norm() == 0);
  }

  TEST_CASE("linear model has no higher-order content") {
    auto m = random_model(2);
    m.G.clear();
    m.H.clear();
    const auto P = param(m, {0}, Style::cnf, {TruncMode::coupled, 4, 2, 1}, 0.5);
    for (const auto& e : P.entries)
      if (e.p >= 2) {
        CHECK(e.nu.norm() == 0);
        CHECK(e.mu.norm() == 0);
        CHECK(e.Psi.norm() == 0);
      }
    std::vector<ResidualSample<double>> s(1);
    s[0].z = Eigen::VectorXcd::Constant(2, cd(0.3, 0.1));
    s[0].z[1] = std::conj(s[0].z[0]);
    s[0].phase = 0.4;
    s[0].eps = 0.2;
    CHECK(invariance_residual(P, s)[0] < 1e-13);
  }

  TEST_CASE("cubic normal form coefficient") {
    const auto P = param(builtin_duffing(1, 0, 0, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 0, 1}, 1.0);
    const auto* e = P.find({2, 1, 0, 0});
    REQUIRE(e);
    CHECK(e->f[0].imag() / 4 == doctest::Approx(3.0 / 8).epsilon(1e-12));
    const auto* c = P.find({3, 0, 0, 0});
    REQUIRE(c);
    CHECK(c->f.norm() == 0);
    const cd l = P.basis.lambda[0];
    CHECK(std::abs(c->Psi[0] - cd(-1) / (9.0 * l * l + 1.0)) < 1e-14);
  }

  TEST_CASE("superharmonic resonant monomial appears only with enough forcing order") {
    const auto m = builtin_duffing(1, 0.002, 0, 1);
    const auto P3 = param(m, {0}, Style::cnf, {TruncMode::coupled, 3, 3, 1}, 1.0 / 3);
    const auto* e = P3.find({0, 0, 3, 0});
    REQUIRE(e);
    CHECK(std::abs(e->f[0]) > 0);
    const auto P1 = param(m, {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 1.0 / 3);
    CHECK(P1.find({0, 0, 3, 0}) == nullptr);
  }

  TEST_CASE("structural invariants on a random model") {
    const auto m = random_model(4);
    for (Style st : {Style::cnf, Style::rnf, Style::graph})
      for (std::vector<int> masters : {std::vector<int>{0}, std::vector<int>{0, 1}}) {
        const double Omega = solve_real_mode_basis<double>(m, masters).omega[0];
        const auto P = param(m, masters, st, {TruncMode::coupled, 4, 2, 1}, Omega);
        const int n = P.basis.n;
        const Eigen::MatrixXcd M = m.M.cast<cd>();
        for (const auto& e : P.entries) {
          CHECK(e.f.size() == 2 * n);
          CHECK(e.alpha.size() == static_cast<std::size_t>(2 * n + 2));
          const auto* c = P.find(conjugate_index(e.alpha, n));
          REQUIRE(c);
          CHECK(rel(c->Psi, e.Psi.conjugate()) < 1e-12);
          if (e.p < 2) continue;
          Eigen::VectorXcd ups = e.sigma * e.Psi - e.mu;
          for (int r = 0; r < 2 * n; ++r) ups += e.f[r] * P.basis.YU.col(r);
          CHECK(rel(ups, e.Ups) < 1e-12);
          for (int r = 0; r < 2 * n; ++r) {
            const bool in_R = std::find(e.R_set.begin(), e.R_set.end(), r) != e.R_set.end();
            if (!in_R) CHECK(e.f[r] == cd(0));
            if (in_R) {
              const cd k = P.basis.XV.col(r).dot(M * e.Ups) + P.basis.XU.col(r).dot(M * e.Psi);
              CHECK(std::abs(k) < 1e-10 * std::max(1.0, e.Psi.norm()));
            }
          }
        }
        CHECK(P.max_projection_error < 1e-8);
      }
  }

  TEST_CASE("residual order for every style and truncation") {
    const auto m = random_model(6);
    for (Style st : {Style::cnf, Style::rnf, Style::graph})
      for (TruncMode tm : {TruncMode::coupled, TruncMode::disjoint, TruncMode::asymptotic}) {
        const int o = 4;
        const int oe = tm == TruncMode::coupled ? o : tm == TruncMode::asymptotic ? 0 : 2;
        const auto P = param(m, {0}, st, {tm, o, oe, 1}, 1.3);
        // eps follows rho in coupled mode; the other modes are probed autonomously
        const double slope = residual_slope(P, tm == TruncMode::coupled);
        CHECK(slope >= o + 0.5);
      }
  }

  TEST_CASE("modal oracle agrees with the bordered solve") {
    const auto m = random_model(8);
    const auto spec = dense_spectrum(m);
    const auto b = solve_real_mode_basis<double>(m, {0});
    ParamOptions opt;
    opt.rule = {TruncMode::coupled, 3, 1, 1};
    opt.Omega = b.omega[0];
    const auto A = compute_parametrisation<double>(m, b, opt);
    opt.solver = SolverKind::modal_oracle;
    opt.spectrum = &spec;
    const auto B = compute_parametrisation<double>(m, b, opt);
    for (const auto& e : A.entries) {
      const auto* o = B.find(e.alpha);
      REQUIRE(o);
      CHECK(rel(e.Psi, o->Psi) < 1e-8);
      if (e.f.norm() > 0) CHECK(rel(e.f, o->f) < 1e-8);
    }
  }

  TEST_CASE("single-master fast path") {
    const auto m = builtin_duffing(1, 0, 0, 1);
    const auto b = solve_real_mode_basis<double>(m, {0});
    // border scalar (sigma - conj(lambda)) at sigma = lambda is 2 i omega in the undamped case
    CHECK(std::abs((b.lambda[0] - std::conj(b.lambda[0])) - cd(0, 2)) < 1e-15);
    const Eigen::VectorXcd nu = Eigen::VectorXcd::Constant(1, cd(0.3, -0.2));
    const Eigen::VectorXcd mu = Eigen::VectorXcd::Constant(1, cd(-0.1, 0.05));
    for (auto [s, R] : {std::make_pair(cd(0, 3), std::vector<int>{}), std::make_pair(b.lambda[0], std::vector<int>{0})}) {
      const auto x = solve_orderp<double>(m, b, s, R, nu, mu);
      const auto y = cnf_single_master_solve(m, b, s, R, nu, mu);
      CHECK(rel(x.Psi, y.Psi) < 1e-12);
      CHECK(rel(x.Ups, y.Ups) < 1e-12);
      CHECK((x.f - y.f).norm() <= 1e-12 * std::max(1.0, x.f.norm()));
    }
  }

  TEST_CASE("autonomous truncation with appended linear forcing") {
    auto P = param(builtin_duffing(1, 0.01, 0, 1), {0}, Style::graph, {TruncMode::coupled, 5, 0, 1}, 1.0);
    CHECK(P.find({0, 0, 1, 0}) == nullptr);
    append_linear_forcing(P);
    const auto* e = P.find({0, 0, 1, 0});
    REQUIRE(e);
    CHECK(e->Psi.norm() == 0);
    CHECK(std::abs(e->f[0] - P.basis.XV.col(0).dot(P.Eplus)) < 1e-15);
  }

  TEST_CASE("quad precision agrees with double") {
    const auto m = random_model(12);
    const auto bd = solve_real_mode_basis<double>(m, {0});
    const auto bq = solve_real_mode_basis<quad>(m, {0});
    ParamOptions opt;
    opt.rule = {TruncMode::coupled, 4, 1, 1};
    opt.Omega = bd.omega[0];
    const auto Pd = compute_parametrisation<double>(m, bd, opt);
    const auto Pq = compute_parametrisation<quad>(m, bq, opt);
    REQUIRE(Pd.entries.size() == Pq.entries.size());
    for (const auto& e : Pq.entries) {
      const auto* d = Pd.find(e.alpha);
      REQUIRE(d);
      Eigen::VectorXcd q(e.Psi.size());
      for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = to_cd(e.Psi[i]);
      CHECK(rel(q, d->Psi) < 1e-10);
    }
  }

  TEST_CASE("threaded stages give the same coefficients") {
    const auto m = random_model(14);
    const auto A = param(m, {0, 1}, Style::cnf, {TruncMode::coupled, 4, 2, 1}, 1.0, 1);
    const auto B = param(m, {0, 1}, Style::cnf, {TruncMode::coupled, 4, 2, 1}, 1.0, 3);
    REQUIRE(A.entries.size() == B.entries.size());
    CHECK(parametrisation_json(A) == parametrisation_json(B));
  }

  TEST_CASE("deterministic json with schema version") {
    const auto m = builtin_duffing(1, 0.01, 0.3, 1);
    const auto a = parametrisation_json(param(m, {0}, Style::cnf, {TruncMode::coupled, 5, 3, 1}, 1.0));
    const auto b = parametrisation_json(param(m, {0}, Style::cnf, {TruncMode::coupled, 5, 3, 1}, 1.0));
    CHECK(a == b);
    CHECK(a.find("\"schema_version\": " + std::to_string(kSchemaVersion)) != std::string::npos);
  }

  TEST_CASE("invariance residual vanishes at the origin") {
    const auto P = param(builtin_duffing(1, 0.01, 0.3, 1), {0}, Style::cnf, {TruncMode::coupled, 3, 1, 1}, 1.0);
    std::vector<ResidualSample<double>> s(1);
    s[0].z = Eigen::VectorXcd::Zero(2);
    CHECK(invariance_residual(P, s)[0] == 0);
  }
}
