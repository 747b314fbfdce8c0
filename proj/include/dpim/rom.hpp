#pragma once

#include <string>
#include <vector>

#include "dpim/parametrisation.hpp"
#include "dpim/periodic.hpp"

namespace dpim {

// Polynomial reduced dynamics zdot = f(z, z+, z-) with z+- = eps e^{+-i tau}.
struct ReducedDynamics {
  int n = 0;
  double Omega0 = 0;
  std::vector<MultiIndex> alphas;
  std::vector<Eigen::VectorXcd> coeffs;  // 2n rows each

  // zdot for the 2n master coordinates; Jz = d zdot / d z when requested.
  Eigen::VectorXcd eval(const Eigen::VectorXcd& z, double tau, double eps, Eigen::MatrixXcd* Jz = nullptr) const;
};

// Throws when the coefficient set is not conjugate symmetric.
ReducedDynamics reduced_dynamics(const Parametrisation& P);

// Real state [x1, y1, ..., xn, yn] with z_j = x_j + i y_j.
Eigen::VectorXcd complex_state(const Eigen::VectorXd& x, int n);
Eigen::VectorXd real_state(const Eigen::VectorXcd& z, int n);

PeriodicSystem realify(const ReducedDynamics& rd, double eps);

// Largest |zdot_{j+n} - conj(zdot_j)| at a real state.
double realification_defect(const ReducedDynamics& rd, const Eigen::VectorXd& x, double tau, double eps);

Eigen::VectorXcd eval_field(const ReducedDynamics& rd, const Eigen::VectorXcd& z, double t, double Omega, double eps);

struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
};

Trajectory integrate(const ReducedDynamics& rd, const Eigen::VectorXd& x0, double t0, double t1, double Omega,
                     double eps, double dt_out, double rtol = 1e-9, double atol = 1e-12);
void write_trajectory_csv(const Trajectory& tr, const std::string& path);

struct Reconstruction {
  Eigen::VectorXd U, V;
};
Reconstruction reconstruct(const Parametrisation& P, const Eigen::VectorXcd& z, double t, double Omega, double eps);

struct RomFrcOptions {
  HBConfig hb;
  bool reparametrise_per_point = false;
  int observe_mode = -1;  // undamped mode for the amplitude; -1 selects the first master
  int amp_samples = 128;
  int threads = 1;
};

FRCBranch continue_frc(const Parametrisation& P, double lo, double hi, double eps, const RomFrcOptions& opt);

// Amplitude of a physical displacement history: max |phi^T M U(t)| * phi_max / L_CH.
double modal_amplitude(const MechModel& m, int mode, const std::vector<Eigen::VectorXd>& U);

struct WhiskerSpec {
  double radius = 0.1;
  int n_grid = 21;
  bool modal = false;  // slave measured as a modal coordinate instead of a dof
  int index = 0;       // dof or mode, 0-based
};

struct WhiskerSample {
  int phase_index = 0;
  double phase = 0;
  double re_z = 0, im_z = 0, slave = 0;
};

struct WhiskerResult {
  std::vector<WhiskerSample> samples;
  double validity_radius = 0;
  bool outside_validity = false;
};

WhiskerResult whisker_snapshot(const Parametrisation& P, double phase, int phase_index, double eps,
                               const WhiskerSpec& spec);
void write_whisker_csv(const std::vector<WhiskerSample>& s, const std::string& path);

}  // namespace dpim
