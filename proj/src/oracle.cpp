#include "dpim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>

namespace dpim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct ObservedMode {
  Eigen::VectorXd w;  // M phi
  double omega = 0;
  double xi = 0;
  double scale = 1;
};

ObservedMode observed_mode(const MechModel& m, int mode) {
  const auto modes = undamped_modes(m);
  if (mode < 0 || mode >= m.N) throw std::invalid_argument("observed mode out of range");
  ObservedMode o;
  const Eigen::VectorXd phi = modes.phi.col(mode);
  o.w = m.M * phi;
  o.omega = modes.omega[mode];
  o.xi = phi.dot(m.C * phi) / (2 * o.omega);
  o.scale = amplitude_scale(m, phi);
  return o;
}

}  // namespace

PeriodicSystem full_system(const MechModel& m, double eps) {
  const int N = m.N;
  if (N > 60) throw std::invalid_argument("full_system: dense tensor unfolding limited to 60 dofs");
  const Eigen::MatrixXd Minv = m.M.inverse();
  const Eigen::VectorXd F = eps * forcing_shape(m);
  const Eigen::MatrixXd MK = Minv * m.K, MC = Minv * m.C;
  // Dense unfoldings: G as N x N^2, H as N x N^3, premultiplied by M^-1.
  Eigen::MatrixXd Gd = Eigen::MatrixXd::Zero(N, N * N), Hd = Eigen::MatrixXd::Zero(N, N * N * N);
  for (const auto& e : m.G) Gd(e.i, e.j * N + e.k) += e.v;
  for (const auto& e : m.H) Hd(e.i, (e.j * N + e.k) * N + e.l) += e.v;
  Gd = Minv * Gd;
  Hd = Minv * Hd;
  const Eigen::VectorXd MF = Minv * F;
  PeriodicSystem sys;
  sys.dim = 2 * N;
  sys.field = [Gd, Hd, MF, MK, MC, N](const Eigen::VectorXd& x, double tau, double, Eigen::VectorXd& f,
                                      Eigen::MatrixXd* J) {
    const Eigen::VectorXd q = x.head(N), v = x.tail(N);
    Eigen::VectorXd qq(N * N), qqq(N * N * N);
    for (int j = 0; j < N; ++j) qq.segment(j * N, N) = q[j] * q;
    for (int j = 0; j < N; ++j) qqq.segment(j * N * N, N * N) = q[j] * qq;
    f.resize(2 * N);
    f.head(N) = v;
    f.tail(N) = -MK * q - MC * v + MF * std::cos(tau) - Gd * qq - Hd * qqq;
    if (!J) return;
    J->setZero(2 * N, 2 * N);
    J->topRightCorner(N, N).setIdentity();
    Eigen::MatrixXd D(N, N);
    for (int j = 0; j < N; ++j) D.col(j) = 2 * Gd.middleCols(j * N, N) * q + 3 * Hd.middleCols(j * N * N, N * N) * qq;
    J->bottomLeftCorner(N, N) = -MK - D;
    J->bottomRightCorner(N, N) = -MC;
  };
  return sys;
}

Eigen::VectorXcd linear_frf(const MechModel& m, double Omega, double eps) {
  const cd I(0, 1);
  const Eigen::MatrixXcd D = m.K.cast<cd>() - Omega * Omega * m.M.cast<cd>() + I * Omega * m.C.cast<cd>();
  return D.partialPivLu().solve((eps * forcing_shape(m)).cast<cd>());
}

FRCBranch hbm_full(const MechModel& m, double lo, double hi, double eps, const FullOracleOptions& opt) {
  opt.hb.validate();
  if (m.N * (2 * opt.hb.H + 1) * 2 > opt.max_unknowns)
    throw std::invalid_argument("hbm_full: model too large for dense harmonic balance (" +
                                std::to_string(m.N * (2 * opt.hb.H + 1) * 2) + " unknowns)");
  const PeriodicSystem sys = full_system(m, eps);
  const ObservedMode ob = observed_mode(m, opt.observe_mode);
  const int N = m.N, ns = opt.amp_samples;
  AmplitudeFn amp = [ob, N, ns](const HarmonicBalance& hb, const Eigen::VectorXd& X, double) {
    return periodic_abs_max([&](double tau) { return ob.w.dot(hb.sample(X, tau).head(N)); }, ns) * ob.scale;
  };
  HarmonicBalance hb(sys, opt.hb.H, opt.hb.fourier_points());
  const Eigen::VectorXcd q = linear_frf(m, lo, eps);
  Eigen::VectorXcd c(2 * N);
  c << q, cd(0, lo) * q;
  const Eigen::VectorXd X0 = hb.from_first_harmonic(c);
  return continue_branch(sys, amp, lo, hi, opt.hb, &X0);
}

SteadyState time_integrate_full(const MechModel& m, double Omega, double eps, const TimeIntegrationOptions& opt,
                                const Eigen::VectorXd* q0) {
  namespace ode = boost::numeric::odeint;
  using state = std::vector<double>;
  if (!(Omega > 0)) throw std::invalid_argument("time_integrate_full: Omega must be positive");
  const PeriodicSystem sys = full_system(m, eps);
  const ObservedMode ob = observed_mode(m, opt.observe_mode);
  const int N = m.N;
  double settle = opt.settle_time;
  if (settle <= 0) {
    if (!(ob.xi > 0)) throw std::invalid_argument("time_integrate_full: undamped model needs an explicit settle time");
    settle = 20.0 / (ob.xi * ob.omega);
  }
  const double T = kTwoPi / Omega;
  settle = std::ceil(settle / T) * T;

  state x(2 * N, 0.0);
  if (q0) std::copy(q0->data(), q0->data() + std::min<Eigen::Index>(q0->size(), 2 * N), x.begin());
  Eigen::VectorXd xv(2 * N), fv;
  auto rhs = [&](const state& s, state& ds, double t) {
    xv = Eigen::Map<const Eigen::VectorXd>(s.data(), s.size());
    sys.field(xv, Omega * t, Omega, fv, nullptr);
    std::copy(fv.data(), fv.data() + fv.size(), ds.begin());
  };
  auto stepper = ode::make_controlled(opt.atol, opt.rtol, ode::runge_kutta_dopri5<state>());
  ode::integrate_adaptive(stepper, rhs, x, 0.0, settle, T / opt.samples_per_period);

  // Two consecutive windows of average_periods / 2 periods each.
  const int half = std::max(1, opt.average_periods / 2);
  double amp[2] = {0, 0};
  const double dt = T / opt.samples_per_period;
  double t = settle;
  for (int w = 0; w < 2; ++w) {
    for (int k = 0; k < half * opt.samples_per_period; ++k) {
      ode::integrate_adaptive(stepper, rhs, x, t, t + dt, dt);
      t += dt;
      double u = 0;
      for (int i = 0; i < N; ++i) u += ob.w[i] * x[i];
      amp[w] = std::max(amp[w], std::abs(u));
    }
  }
  SteadyState r;
  r.amplitude = amp[1] * ob.scale;
  r.drift = std::abs(amp[1] - amp[0]) / std::max(amp[1], 1e-300);
  r.settled = r.drift < 1e-3 || amp[1] < 1e-14;
  return r;
}

std::vector<double> detuning_cubic_amplitudes(double Gamma, double s, double mu, double F) {
  std::vector<double> out;
  if (F == 0) return {0.0};
  if (Gamma == 0) return {std::sqrt(F * F / (mu * mu + s * s))};
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  C(1, 0) = 1;
  C(2, 1) = 1;
  C(0, 2) = F * F / (Gamma * Gamma);
  C(1, 2) = -(mu * mu + s * s) / (Gamma * Gamma);
  C(2, 2) = 2 * s / Gamma;
  const Eigen::Vector3cd r = Eigen::EigenSolver<Eigen::Matrix3d>(C).eigenvalues();
  const double big = r.cwiseAbs().maxCoeff();
  for (int i = 0; i < 3; ++i)
    if (std::abs(r[i].imag()) <= 1e-9 * big && r[i].real() > 0) out.push_back(std::sqrt(r[i].real()));
  std::sort(out.begin(), out.end());
  return out;
}

double MultipleScales::gamma() const {
  return 3 * h / (8 * omega0) - 5 * g * g / (12 * omega0 * omega0 * omega0);
}

double MultipleScales::backbone(double a) const { return omega0 + gamma() * a * a; }

std::vector<double> MultipleScales::primary(double kappa, double Omega) const {
  return detuning_cubic_amplitudes(gamma(), Omega - omega0, xi * omega0, kappa / (2 * omega0));
}

double MultipleScales::forced_part(double kappa, double Omega) const {
  return kappa / (omega0 * omega0 - Omega * Omega);
}

std::vector<double> MultipleScales::superharmonic3(double kappa, double Omega) const {
  const double L = forced_part(kappa, Omega) / 2;
  const double s = 3 * Omega - omega0 - 3 * h * L * L / omega0;
  return detuning_cubic_amplitudes(gamma(), s, xi * omega0, h * L * L * L / omega0);
}

std::vector<double> MultipleScales::superharmonic2(double kappa, double Omega) const {
  const double L = forced_part(kappa, Omega) / 2;
  const double s = 2 * Omega - omega0 - 3 * h * L * L / omega0;
  return detuning_cubic_amplitudes(gamma(), s, xi * omega0, g * L * L / omega0);
}

}  // namespace dpim
