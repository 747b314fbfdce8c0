#include "dpim/rom.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace dpim {

namespace {


std::vector<cd> coordinate_vector(const Eigen::VectorXcd& z, double tau, double eps) {
  std::vector<cd> zf(z.data(), z.data() + z.size());
  zf.push_back(eps * cd(std::cos(tau), std::sin(tau)));
  zf.push_back(eps * cd(std::cos(tau), -std::sin(tau)));
  return zf;
}

cd monomial(const MultiIndex& a, const std::vector<cd>& zf) {
  cd m(1);
  for (std::size_t v = 0; v < a.size(); ++v)
    for (int e = 0; e < a[v]; ++e) m *= zf[v];
  return m;
}

}  // namespace

Eigen::VectorXcd ReducedDynamics::eval(const Eigen::VectorXcd& z, double tau, double eps, Eigen::MatrixXcd* Jz) const {
  const int n2 = 2 * n;
  const auto zf = coordinate_vector(z, tau, eps);
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n2);
  if (Jz) Jz->setZero(n2, n2);
  for (std::size_t t = 0; t < alphas.size(); ++t) {
    const MultiIndex& a = alphas[t];
    out += monomial(a, zf) * coeffs[t];
    if (!Jz) continue;
    for (int s = 0; s < n2; ++s) {
      if (a[s] == 0) continue;
      MultiIndex d = a;
      --d[s];
      Jz->col(s) += (double(a[s]) * monomial(d, zf)) * coeffs[t];
    }
  }
  return out;
}

ReducedDynamics reduced_dynamics(const Parametrisation& P) {
  ReducedDynamics rd;
  rd.n = P.basis.n;
  rd.Omega0 = P.Omega;
  double scale = 0;
  for (const auto& e : P.entries) scale = std::max(scale, e.f.cwiseAbs().maxCoeff());
  const double tol = 1e-10 * std::max(scale, 1e-300);
  for (const auto& e : P.entries) {
    if (e.f.cwiseAbs().maxCoeff() <= 0) continue;
    const auto* c = P.find(conjugate_index(e.alpha, rd.n));
    for (int r = 0; r < 2 * rd.n; ++r) {
      const cd mirror = c ? c->f[P.basis.partner(r)] : cd(0);
      if (std::abs(std::conj(e.f[r]) - mirror) > tol)
        throw std::runtime_error("reduced dynamics are not conjugate symmetric at " + to_string(e.alpha));
    }
    rd.alphas.push_back(e.alpha);
    rd.coeffs.push_back(e.f);
  }
  return rd;
}

Eigen::VectorXcd complex_state(const Eigen::VectorXd& x, int n) {
  Eigen::VectorXcd z(2 * n);
  for (int j = 0; j < n; ++j) {
    z[j] = cd(x[2 * j], x[2 * j + 1]);
    z[j + n] = std::conj(z[j]);
  }
  return z;
}

Eigen::VectorXd real_state(const Eigen::VectorXcd& z, int n) {
  Eigen::VectorXd x(2 * n);
  for (int j = 0; j < n; ++j) {
    x[2 * j] = z[j].real();
    x[2 * j + 1] = z[j].imag();
  }
  return x;
}

namespace {

void realified_field(const ReducedDynamics& rd, double eps, const Eigen::VectorXd& x, double tau, Eigen::VectorXd& f,
                     Eigen::MatrixXd* J) {
  {
    const int n = rd.n;
    Eigen::MatrixXcd Jz;
    const Eigen::VectorXcd zd = rd.eval(complex_state(x, n), tau, eps, J ? &Jz : nullptr);
    f.resize(2 * n);
    for (int j = 0; j < n; ++j) {
      f[2 * j] = zd[j].real();
      f[2 * j + 1] = zd[j].imag();
    }
    if (!J) return;
    J->resize(2 * n, 2 * n);
    const cd I(0, 1);
    for (int j = 0; j < n; ++j)
      for (int s = 0; s < n; ++s) {
        const cd dx = Jz(j, s) + Jz(j, s + n);
        const cd dy = I * (Jz(j, s) - Jz(j, s + n));
        (*J)(2 * j, 2 * s) = dx.real();
        (*J)(2 * j + 1, 2 * s) = dx.imag();
        (*J)(2 * j, 2 * s + 1) = dy.real();
        (*J)(2 * j + 1, 2 * s + 1) = dy.imag();
      }
  }
}

}  // namespace

PeriodicSystem realify(const ReducedDynamics& rd, double eps) {
  PeriodicSystem sys;
  sys.dim = 2 * rd.n;
  sys.field = [rd, eps](const Eigen::VectorXd& x, double tau, double, Eigen::VectorXd& f, Eigen::MatrixXd* J) {
    realified_field(rd, eps, x, tau, f, J);
  };
  return sys;
}

double realification_defect(const ReducedDynamics& rd, const Eigen::VectorXd& x, double tau, double eps) {
  const Eigen::VectorXcd zd = rd.eval(complex_state(x, rd.n), tau, eps);
  double d = 0;
  for (int j = 0; j < rd.n; ++j) d = std::max(d, std::abs(zd[j + rd.n] - std::conj(zd[j])));
  return d;
}

Eigen::VectorXcd eval_field(const ReducedDynamics& rd, const Eigen::VectorXcd& z, double t, double Omega, double eps) {
  return rd.eval(z, Omega * t, eps);
}

Trajectory integrate(const ReducedDynamics& rd, const Eigen::VectorXd& x0, double t0, double t1, double Omega,
                     double eps, double dt_out, double rtol, double atol) {
  namespace ode = boost::numeric::odeint;
  using state = std::vector<double>;
  const int n = rd.n;
  auto rhs = [&](const state& x, state& dx, double t) {
    const Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    const Eigen::VectorXcd zd = rd.eval(complex_state(xv, n), Omega * t, eps);
    for (int j = 0; j < n; ++j) {
      dx[2 * j] = zd[j].real();
      dx[2 * j + 1] = zd[j].imag();
    }
  };
  Trajectory tr;
  state x(x0.data(), x0.data() + x0.size());
  auto obs = [&](const state& s, double t) {
    tr.t.push_back(t);
    tr.x.push_back(Eigen::Map<const Eigen::VectorXd>(s.data(), s.size()));
  };
  auto stepper = ode::make_controlled(atol, rtol, ode::runge_kutta_dopri5<state>());
  try {
    ode::integrate_const(stepper, rhs, x, t0, t1, dt_out, obs);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("ROM integration failed: ") + e.what());
  }
  return tr;
}

void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
  std::ofstream o(path);
  if (!o) throw std::runtime_error("cannot write " + path);
  o.precision(15);
  o << 't';
  const int dim = tr.x.empty() ? 0 : static_cast<int>(tr.x[0].size());
  for (int j = 0; j < dim / 2; ++j) o << ",x" << j + 1 << ",y" << j + 1;
  o << '\n';
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    o << tr.t[i];
    for (int k = 0; k < dim; ++k) o << ',' << tr.x[i][k];
    o << '\n';
  }
}

Reconstruction reconstruct(const Parametrisation& P, const Eigen::VectorXcd& z, double t, double Omega, double eps) {
  const auto zf = coordinate_vector(z, Omega * t, eps);
  Eigen::VectorXcd U = Eigen::VectorXcd::Zero(P.model.N), V = Eigen::VectorXcd::Zero(P.model.N);
  for (const auto& e : P.entries) {
    const cd m = monomial(e.alpha, zf);
    U += m * e.Psi;
    V += m * e.Ups;
  }
  return {U.real(), V.real()};
}

double modal_amplitude(const MechModel& m, int mode, const std::vector<Eigen::VectorXd>& U) {
  const auto modes = undamped_modes(m);
  const Eigen::VectorXd w = m.M * modes.phi.col(mode);
  double a = 0;
  for (const auto& u : U) a = std::max(a, std::abs(w.dot(u)));
  return a * amplitude_scale(m, modes.phi.col(mode));
}

namespace {

// Modal projections of the mapping coefficients, used for fast amplitude evaluation.
struct ModalMapping {
  std::vector<MultiIndex> alphas;
  std::vector<cd> q;
  double scale = 1;
};

ModalMapping modal_mapping(const Parametrisation& P, int mode) {
  const auto modes = undamped_modes(P.model);
  const Eigen::VectorXcd w = (P.model.M * modes.phi.col(mode)).cast<cd>();
  ModalMapping mm;
  mm.scale = amplitude_scale(P.model, modes.phi.col(mode));
  for (const auto& e : P.entries) {
    mm.alphas.push_back(e.alpha);
    mm.q.push_back(w.dot(e.Psi));
  }
  return mm;
}

}  // namespace

FRCBranch continue_frc(const Parametrisation& P, double lo, double hi, double eps, const RomFrcOptions& opt) {
  if (!(lo <= P.Omega && P.Omega <= hi) && !opt.reparametrise_per_point)
    throw std::invalid_argument("continue_frc: window must contain the expansion frequency");
  const int mode = opt.observe_mode >= 0 ? opt.observe_mode : P.basis.modes.at(0);
  const int n = P.basis.n;

  struct Cached {
    std::shared_ptr<Parametrisation> P;
    ReducedDynamics rd;
    ModalMapping mm;
  };
  auto base = std::make_shared<Cached>();
  base->P = std::make_shared<Parametrisation>(P);
  base->rd = reduced_dynamics(P);
  base->mm = modal_mapping(P, mode);
  auto cache = std::make_shared<std::map<double, std::shared_ptr<Cached>>>();
  ParamOptions popt;
  popt.style = P.style;
  popt.rule = P.rule;
  popt.eta = P.eta;
  popt.threads = opt.threads;
  auto at = [=](double Omega) -> std::shared_ptr<Cached> {
    if (!opt.reparametrise_per_point) return base;
    auto it = cache->find(Omega);
    if (it != cache->end()) return it->second;
    ParamOptions o = popt;
    o.Omega = Omega;
    auto c = std::make_shared<Cached>();
    c->P = std::make_shared<Parametrisation>(compute_parametrisation<double>(P.model, P.basis, o, base->P.get()));
    if (P.rule.o_eps == 0) append_linear_forcing(*c->P);
    c->rd = reduced_dynamics(*c->P);
    c->mm = modal_mapping(*c->P, mode);
    if (cache->size() > 16) cache->clear();
    cache->emplace(Omega, c);
    return c;
  };

  PeriodicSystem sys;
  sys.dim = 2 * n;
  sys.omega_dependent = opt.reparametrise_per_point;
  sys.field = [=](const Eigen::VectorXd& x, double tau, double Omega, Eigen::VectorXd& f, Eigen::MatrixXd* J) {
    realified_field(at(Omega)->rd, eps, x, tau, f, J);
  };

  const int ns = opt.amp_samples;
  AmplitudeFn amp = [=](const HarmonicBalance& hb, const Eigen::VectorXd& X, double Omega) {
    const auto c = at(Omega);
    const auto u = [&](double tau) {
      const auto zf = coordinate_vector(complex_state(hb.sample(X, tau), n), tau, eps);
      cd s(0);
      for (std::size_t k = 0; k < c->mm.alphas.size(); ++k) s += c->mm.q[k] * monomial(c->mm.alphas[k], zf);
      return s.real();
    };
    return periodic_abs_max(u, ns) * c->mm.scale;
  };
  return continue_branch(sys, amp, lo, hi, opt.hb);
}

WhiskerResult whisker_snapshot(const Parametrisation& P, double phase, int phase_index, double eps,
                               const WhiskerSpec& spec) {
  if (P.basis.n != 1) throw std::invalid_argument("whisker snapshots need a single master mode");
  if (spec.n_grid < 2) throw std::invalid_argument("whisker grid needs at least two points per axis");
  WhiskerResult res;
  // Root test on the autonomous displacement coefficients.
  double lin = 0;
  std::map<int, double> by_order;
  for (const auto& e : P.entries) {
    if (e.pf != 0) continue;
    const double nrm = e.Psi.norm();
    if (e.p == 1) lin = std::max(lin, nrm);
    else by_order[e.p] = std::max(by_order[e.p], nrm);
  }
  res.validity_radius = std::numeric_limits<double>::infinity();
  for (auto& [p, nrm] : by_order)
    if (nrm > 0 && lin > 0) res.validity_radius = std::min(res.validity_radius, std::pow(lin / nrm, 1.0 / (p - 1)));
  res.outside_validity = spec.radius * std::sqrt(2.0) > res.validity_radius;

  Eigen::VectorXd w;
  if (spec.modal) {
    const auto modes = undamped_modes(P.model);
    w = P.model.M * modes.phi.col(spec.index);
  }
  const double Omega = P.Omega;
  const double t = phase / Omega;
  for (int i = 0; i < spec.n_grid; ++i)
    for (int j = 0; j < spec.n_grid; ++j) {
      const double re = -spec.radius + 2 * spec.radius * i / (spec.n_grid - 1);
      const double im = -spec.radius + 2 * spec.radius * j / (spec.n_grid - 1);
      Eigen::VectorXcd z(2);
      z << cd(re, im), cd(re, -im);
      const auto rc = reconstruct(P, z, t, Omega, eps);
      WhiskerSample s;
      s.phase_index = phase_index;
      s.phase = phase;
      s.re_z = re;
      s.im_z = im;
      s.slave = spec.modal ? w.dot(rc.U) : rc.U[spec.index];
      res.samples.push_back(s);
    }
  return res;
}

void write_whisker_csv(const std::vector<WhiskerSample>& s, const std::string& path) {
  std::ofstream o(path);
  if (!o) throw std::runtime_error("cannot write " + path);
  o.precision(15);
  o << "re_z,im_z,slave_value,phase_index\n";
  for (const auto& x : s) o << x.re_z << ',' << x.im_z << ',' << x.slave << ',' << x.phase_index << '\n';
}

}  // namespace dpim
