#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dpim {

// dx/dt = F(x, tau) with tau = Omega t the forcing phase.
struct PeriodicSystem {
  int dim = 0;
  std::function<void(const Eigen::VectorXd& x, double tau, double Omega, Eigen::VectorXd& f, Eigen::MatrixXd* J)>
      field;
  // The field changes with Omega at fixed phase.
  bool omega_dependent = false;
};

struct HBConfig {
  int H = 9;
  int n_fourier = 0;  // 0 selects 4H + 3
  double ds = 0.02;
  double ds_min = 1e-7;
  double ds_max = 0.05;
  int max_points = 5000;
  double tol = 1e-10;
  int max_newton = 25;
  bool stability = true;
  double x_scale = 0;  // 0 selects the seed amplitude

  int fourier_points() const { return n_fourier > 0 ? n_fourier : 4 * H + 3; }
  void validate() const;
};

struct FRCPoint {
  double omega = 0;
  double amplitude = 0;
  bool stable = true;
  bool fold = false;
  double max_multiplier = 0;
  Eigen::VectorXd coeffs;
};

struct FRCBranch {
  std::vector<FRCPoint> points;
  int harmonics = 0;
  int n_fourier = 0;
  int steps = 0;
  double omega_lo = 0, omega_hi = 0;

  int fold_count() const;
  // Largest amplitude and the frequency where it occurs.
  std::pair<double, double> peak() const;
};

class HarmonicBalance {
 public:
  HarmonicBalance(const PeriodicSystem& sys, int H, int n_fourier);

  int size() const { return d_ * nh_; }
  int harmonics() const { return H_; }
  // x(tau) from the coefficient vector (layout: harmonic-major, cos/sin pairs).
  Eigen::VectorXd sample(const Eigen::VectorXd& X, double tau) const;
  void residual(const Eigen::VectorXd& X, double Omega, Eigen::VectorXd& R, Eigen::MatrixXd* Jx,
                Eigen::VectorXd* JOmega) const;
  // Newton at fixed Omega.
  bool solve_fixed(Eigen::VectorXd& X, double Omega, double tol, int max_it) const;
  // Coefficients of a real signal given by a complex first harmonic: Re(c e^{i tau}).
  Eigen::VectorXd from_first_harmonic(const Eigen::VectorXcd& c) const;

 private:
  const PeriodicSystem& sys_;
  int d_, H_, nh_, nf_;
  Eigen::MatrixXd Q_;  // nf x nh basis samples
  Eigen::MatrixXd P_;  // nh x nf projection
  Eigen::VectorXd tau_;
};

// Floquet multipliers from RK4 integration of the variational equation.
Eigen::VectorXcd floquet_multipliers(const PeriodicSystem& sys, const HarmonicBalance& hb, const Eigen::VectorXd& X,
                                     double Omega);

// max |g(tau)| over one period: a sampled grid refined by Brent's method around the best sample.
double periodic_abs_max(const std::function<double(double)>& g, int samples);

using AmplitudeFn = std::function<double(const HarmonicBalance& hb, const Eigen::VectorXd& X, double Omega)>;

// Pseudo-arclength continuation in Omega over [lo, hi], starting at lo.
FRCBranch continue_branch(const PeriodicSystem& sys, const AmplitudeFn& amplitude, double lo, double hi,
                          const HBConfig& cfg, const Eigen::VectorXd* X0 = nullptr);

void write_frc_csv(const FRCBranch& b, const std::string& path);

}  // namespace dpim
