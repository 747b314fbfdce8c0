#pragma once

#include <vector>

#include "dpim/model.hpp"
#include "dpim/periodic.hpp"

namespace dpim {

// First-order form [q; v] of M q'' + C q' + K q + G(q,q) + H(q,q,q) = eps F cos(tau).
PeriodicSystem full_system(const MechModel& m, double eps);

struct FullOracleOptions {
  FullOracleOptions() { hb.stability = false; }
  HBConfig hb;
  int observe_mode = 0;
  int amp_samples = 128;
  int max_unknowns = 2000;
};

FRCBranch hbm_full(const MechModel& m, double lo, double hi, double eps, const FullOracleOptions& opt);

// Complex linear response amplitude q = (K - Omega^2 M + i Omega C)^{-1} eps F.
Eigen::VectorXcd linear_frf(const MechModel& m, double Omega, double eps);

struct TimeIntegrationOptions {
  int observe_mode = 0;
  int average_periods = 10;
  double settle_time = 0;  // 0 selects 20 / (xi omega) of the observed mode
  double rtol = 1e-9, atol = 1e-12;
  int samples_per_period = 200;
};

struct SteadyState {
  double amplitude = 0;
  bool settled = true;
  double drift = 0;  // relative change of the amplitude between the last two averaging windows
};

SteadyState time_integrate_full(const MechModel& m, double Omega, double eps, const TimeIntegrationOptions& opt,
                                const Eigen::VectorXd* q0 = nullptr);

// Two-timescale predictions for q'' + 2 xi w0 q' + w0^2 q + g q^2 + h q^3 = kappa cos(Omega t).
struct MultipleScales {
  double omega0 = 1, xi = 0, g = 0, h = 0;

  // Effective cubic coefficient of the backbone w = w0 + Gamma a^2.
  double gamma() const;
  double backbone(double a) const;
  // Physical response amplitudes a near Omega = w0 (one or three branches).
  std::vector<double> primary(double kappa, double Omega) const;
  // Free-vibration amplitude a at Omega near w0/3, plus the forced part 2 Lambda.
  std::vector<double> superharmonic3(double kappa, double Omega) const;
  std::vector<double> superharmonic2(double kappa, double Omega) const;
  double forced_part(double kappa, double Omega) const;  // 2 Lambda
};

// Positive real roots u of G^2 u^3 - 2 s G u^2 + (mu^2 + s^2) u - F^2 = 0, returned as sqrt(u).
std::vector<double> detuning_cubic_amplitudes(double Gamma, double s, double mu, double F);

}  // namespace dpim
