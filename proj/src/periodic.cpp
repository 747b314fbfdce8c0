#include "dpim/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace dpim {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void HBConfig::validate() const {
  if (H < 1) throw std::invalid_argument("harmonic balance: H must be >= 1");
  if (fourier_points() < 4 * H + 1) throw std::invalid_argument("harmonic balance: n_fourier must be >= 4H + 1");
  if (!(ds > 0 && ds_min > 0 && ds_max >= ds_min)) throw std::invalid_argument("continuation: bad step controls");
}

int FRCBranch::fold_count() const {
  return static_cast<int>(std::count_if(points.begin(), points.end(), [](const FRCPoint& p) { return p.fold; }));
}

std::pair<double, double> FRCBranch::peak() const {
  if (points.empty()) return {0, 0};
  std::size_t k = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].amplitude > points[k].amplitude) k = i;
  const double a1 = points[k].amplitude, w1 = points[k].omega;
  if (k == 0 || k + 1 == points.size() || a1 <= 0) return {a1, w1};
  // Parabola through the neighbours, parametrised by chord length in normalised (omega, amplitude).
  const double ws = std::max(omega_hi - omega_lo, 1e-300);
  auto dist = [&](const FRCPoint& p, const FRCPoint& q) {
    return std::hypot((p.omega - q.omega) / ws, (p.amplitude - q.amplitude) / a1);
  };
  const double s0 = -dist(points[k - 1], points[k]), s2 = dist(points[k], points[k + 1]);
  if (!(s0 < 0 && s2 > 0)) return {a1, w1};
  auto fit = [&](double f0, double f1, double f2, double& b, double& c) {
    const double d0 = (f0 - f1) / s0, d2 = (f2 - f1) / s2;
    c = (d2 - d0) / (s2 - s0);
    b = d0 - c * s0;
  };
  double ba, ca, bw, cw;
  fit(points[k - 1].amplitude, a1, points[k + 1].amplitude, ba, ca);
  fit(points[k - 1].omega, w1, points[k + 1].omega, bw, cw);
  if (!(ca < 0)) return {a1, w1};
  const double s = std::clamp(-ba / (2 * ca), s0, s2);
  return {a1 + ba * s + ca * s * s, w1 + bw * s + cw * s * s};
}

HarmonicBalance::HarmonicBalance(const PeriodicSystem& sys, int H, int nf)
    : sys_(sys), d_(sys.dim), H_(H), nh_(2 * H + 1), nf_(nf) {
  tau_.resize(nf_);
  Q_.resize(nf_, nh_);
  P_.resize(nh_, nf_);
  for (int i = 0; i < nf_; ++i) {
    const double t = kTwoPi * i / nf_;
    tau_[i] = t;
    Q_(i, 0) = 1;
    P_(0, i) = 1.0 / nf_;
    for (int k = 1; k <= H_; ++k) {
      Q_(i, 2 * k - 1) = std::cos(k * t);
      Q_(i, 2 * k) = std::sin(k * t);
      P_(2 * k - 1, i) = 2.0 * std::cos(k * t) / nf_;
      P_(2 * k, i) = 2.0 * std::sin(k * t) / nf_;
    }
  }
}

Eigen::VectorXd HarmonicBalance::sample(const Eigen::VectorXd& X, double tau) const {
  Eigen::VectorXd x = X.segment(0, d_);
  for (int k = 1; k <= H_; ++k)
    x += std::cos(k * tau) * X.segment((2 * k - 1) * d_, d_) + std::sin(k * tau) * X.segment(2 * k * d_, d_);
  return x;
}

Eigen::VectorXd HarmonicBalance::from_first_harmonic(const Eigen::VectorXcd& c) const {
  Eigen::VectorXd X = Eigen::VectorXd::Zero(size());
  // Re(c e^{i tau}) = Re(c) cos(tau) - Im(c) sin(tau)
  X.segment(d_, d_) = c.real();
  X.segment(2 * d_, d_) = -c.imag();
  return X;
}

void HarmonicBalance::residual(const Eigen::VectorXd& X, double Omega, Eigen::VectorXd& R, Eigen::MatrixXd* Jx,
                               Eigen::VectorXd* JOmega) const {
  const int n = size();
  Eigen::VectorXd DX = Eigen::VectorXd::Zero(n);
  for (int k = 1; k <= H_; ++k) {
    DX.segment((2 * k - 1) * d_, d_) = k * X.segment(2 * k * d_, d_);
    DX.segment(2 * k * d_, d_) = -k * X.segment((2 * k - 1) * d_, d_);
  }
  R = Omega * DX;
  if (Jx) {
    Jx->setZero(n, n);
    for (int k = 1; k <= H_; ++k)
      for (int j = 0; j < d_; ++j) {
        (*Jx)((2 * k - 1) * d_ + j, 2 * k * d_ + j) = Omega * k;
        (*Jx)(2 * k * d_ + j, (2 * k - 1) * d_ + j) = -Omega * k;
      }
  }
  Eigen::VectorXd f(d_);
  Eigen::MatrixXd J(d_, d_);
  Eigen::MatrixXd PJ(d_ * nh_, d_);
  for (int i = 0; i < nf_; ++i) {
    Eigen::VectorXd x = Q_(i, 0) * X.segment(0, d_);
    for (int m = 1; m < nh_; ++m) x += Q_(i, m) * X.segment(m * d_, d_);
    sys_.field(x, tau_[i], Omega, f, Jx ? &J : nullptr);
    for (int m = 0; m < nh_; ++m) R.segment(m * d_, d_) -= P_(m, i) * f;
    if (Jx) {
      for (int m = 0; m < nh_; ++m) PJ.block(m * d_, 0, d_, d_) = P_(m, i) * J;
      for (int mp = 0; mp < nh_; ++mp) Jx->block(0, mp * d_, n, d_) -= Q_(i, mp) * PJ;
    }
  }
  if (JOmega) {
    *JOmega = DX;
    if (sys_.omega_dependent) {
      const double h = 1e-6 * std::max(1.0, std::abs(Omega));
      for (int i = 0; i < nf_; ++i) {
        Eigen::VectorXd x = Q_(i, 0) * X.segment(0, d_);
        for (int m = 1; m < nh_; ++m) x += Q_(i, m) * X.segment(m * d_, d_);
        Eigen::VectorXd fp(d_), fm(d_);
        sys_.field(x, tau_[i], Omega + h, fp, nullptr);
        sys_.field(x, tau_[i], Omega - h, fm, nullptr);
        const Eigen::VectorXd df = (fp - fm) / (2 * h);
        for (int m = 0; m < nh_; ++m) JOmega->segment(m * d_, d_) -= P_(m, i) * df;
      }
    }
  }
}

bool HarmonicBalance::solve_fixed(Eigen::VectorXd& X, double Omega, double tol, int max_it) const {
  Eigen::VectorXd R;
  Eigen::MatrixXd J;
  for (int it = 0; it < max_it; ++it) {
    residual(X, Omega, R, &J, nullptr);
    const Eigen::VectorXd dX = J.partialPivLu().solve(-R);
    X += dX;
    if (!X.allFinite()) return false;
    if (dX.lpNorm<Eigen::Infinity>() <= tol * std::max(1e-12, X.lpNorm<Eigen::Infinity>())) return true;
  }
  return false;
}

double periodic_abs_max(const std::function<double(double)>& g, int samples) {
  int best = 0;
  double a = -1;
  for (int i = 0; i < samples; ++i) {
    const double v = std::abs(g(kTwoPi * i / samples));
    if (v > a) {
      a = v;
      best = i;
    }
  }
  const double h = kTwoPi / samples;
  const auto r = boost::math::tools::brent_find_minima([&](double t) { return -std::abs(g(t)); },
                                                       kTwoPi * best / samples - h, kTwoPi * best / samples + h, 52);
  return std::max(a, -r.second);
}

Eigen::VectorXcd floquet_multipliers(const PeriodicSystem& sys, const HarmonicBalance& hb, const Eigen::VectorXd& X,
                                     double Omega) {
  const int d = sys.dim;
  Eigen::VectorXd f(d);
  Eigen::MatrixXd J(d, d);
  sys.field(hb.sample(X, 0.0), 0.0, Omega, f, &J);
  const double rate = J.lpNorm<Eigen::Infinity>() / Omega;
  const int steps = std::max(256, static_cast<int>(std::ceil(kTwoPi * rate)));
  const double h = kTwoPi / steps;
  auto rhs = [&](double tau, const Eigen::MatrixXd& Phi) {
    sys.field(hb.sample(X, tau), tau, Omega, f, &J);
    return Eigen::MatrixXd(J * Phi / Omega);
  };
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Identity(d, d);
  for (int s = 0; s < steps; ++s) {
    const double t = s * h;
    const Eigen::MatrixXd k1 = rhs(t, Phi);
    const Eigen::MatrixXd k2 = rhs(t + h / 2, Phi + h / 2 * k1);
    const Eigen::MatrixXd k3 = rhs(t + h / 2, Phi + h / 2 * k2);
    const Eigen::MatrixXd k4 = rhs(t + h, Phi + h * k3);
    Phi += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return Phi.eigenvalues();
}

FRCBranch continue_branch(const PeriodicSystem& sys, const AmplitudeFn& amplitude, double lo, double hi,
                          const HBConfig& cfg, const Eigen::VectorXd* X0) {
  cfg.validate();
  if (!(hi > lo)) throw std::invalid_argument("continuation: empty frequency window");
  HarmonicBalance hb(sys, cfg.H, cfg.fourier_points());
  const int n = hb.size();
  Eigen::VectorXd X = X0 ? *X0 : Eigen::VectorXd::Zero(n);
  if (X.size() != n) throw std::invalid_argument("continuation: seed has the wrong size");
  if (!hb.solve_fixed(X, lo, 1e-12, 50)) throw std::runtime_error("continuation: no convergence at seed point");

  double xs = cfg.x_scale > 0 ? cfg.x_scale : std::max(X.lpNorm<Eigen::Infinity>(), 1e-6);
  const double ws = hi - lo;
  auto pack = [&](const Eigen::VectorXd& Xv, double w) {
    Eigen::VectorXd y(n + 1);
    y.head(n) = Xv / xs;
    y[n] = w / ws;
    return y;
  };
  auto extended_jac = [&](const Eigen::VectorXd& y, Eigen::VectorXd& R, Eigen::MatrixXd& A) {
    Eigen::MatrixXd Jx;
    Eigen::VectorXd Jw;
    hb.residual(y.head(n) * xs, y[n] * ws, R, &Jx, &Jw);
    A.resize(n + 1, n + 1);
    A.topLeftCorner(n, n) = Jx * xs;
    A.topRightCorner(n, 1) = Jw * ws;
  };
  auto tangent = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& t_prev) {
    Eigen::VectorXd R;
    Eigen::MatrixXd A;
    extended_jac(y, R, A);
    A.row(n) = t_prev.transpose();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    rhs[n] = 1;
    Eigen::VectorXd t = A.partialPivLu().solve(rhs);
    t.normalize();
    if (t.dot(t_prev) < 0) t = -t;
    return t;
  };

  FRCBranch br;
  br.harmonics = cfg.H;
  br.n_fourier = cfg.fourier_points();
  br.omega_lo = lo;
  br.omega_hi = hi;
  auto make_point = [&](const Eigen::VectorXd& y, bool fold) {
    FRCPoint pt;
    pt.coeffs = y.head(n) * xs;
    pt.omega = y[n] * ws;
    pt.amplitude = amplitude(hb, pt.coeffs, pt.omega);
    pt.fold = fold;
    if (cfg.stability) {
      const Eigen::VectorXcd mu = floquet_multipliers(sys, hb, pt.coeffs, pt.omega);
      pt.max_multiplier = mu.cwiseAbs().maxCoeff();
      pt.stable = pt.max_multiplier < 1.0;
    }
    return pt;
  };

  Eigen::VectorXd y = pack(X, lo);
  Eigen::VectorXd e_w = Eigen::VectorXd::Zero(n + 1);
  e_w[n] = 1;
  Eigen::VectorXd t = tangent(y, e_w);
  br.points.push_back(make_point(y, false));
  double ds = cfg.ds;
  while (static_cast<int>(br.points.size()) < cfg.max_points) {
    const Eigen::VectorXd y_pred = y + ds * t;
    Eigen::VectorXd yc = y_pred;
    bool ok = false;
    int it = 0;
    Eigen::VectorXd R;
    Eigen::MatrixXd A;
    for (; it < cfg.max_newton; ++it) {
      extended_jac(yc, R, A);
      A.row(n) = t.transpose();
      Eigen::VectorXd F(n + 1);
      F.head(n) = R;
      F[n] = t.dot(yc - y_pred);
      const Eigen::VectorXd dy = A.partialPivLu().solve(-F);
      yc += dy;
      if (!yc.allFinite()) break;
      if (dy.lpNorm<Eigen::Infinity>() <= cfg.tol * std::max(1.0, yc.lpNorm<Eigen::Infinity>())) {
        ok = true;
        break;
      }
    }
    if (ok && (yc - y_pred).norm() > 0.5 * ds + 1e-12) ok = false;
    if (!ok) {
      ds *= 0.5;
      if (ds < cfg.ds_min) throw std::runtime_error("continuation: step size underflow near Omega = " +
                                                    std::to_string(y[n] * ws));
      continue;
    }
    ++br.steps;
    const Eigen::VectorXd t_new = tangent(yc, t);
    const bool fold = (t_new[n] > 0) != (t[n] > 0);
    const double w = yc[n] * ws;
    if (w < lo - 1e-12 * ws || w > hi + 1e-12 * ws) break;
    y = yc;
    t = t_new;
    br.points.push_back(make_point(y, fold));
    const double xn = y.head(n).lpNorm<Eigen::Infinity>() * xs;
    if (cfg.x_scale <= 0 && xn > 2 * xs) {
      const double k = xs / xn;
      xs = xn;
      y.head(n) *= k;
      t.head(n) *= k;
      t.normalize();
    }
    if (it <= 3) ds = std::min(ds * 1.5, cfg.ds_max);
    else if (it > 8) ds = std::max(ds * 0.6, cfg.ds_min);
  }
  return br;
}

void write_frc_csv(const FRCBranch& b, const std::string& path) {
  std::ofstream o(path);
  if (!o) throw std::runtime_error("cannot write " + path);
  o.precision(15);
  o << "omega,amplitude,stable,fold\n";
  for (const auto& p : b.points) o << p.omega << ',' << p.amplitude << ',' << (p.stable ? 1 : 0) << ',' << (p.fold ? 1 : 0) << '\n';
}

}  // namespace dpim
