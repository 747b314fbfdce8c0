#pragma once

#include <string>
#include <vector>

#include "dpim/scalar.hpp"

namespace dpim {

struct Entry3 {
  int i, j, k;
  double v;
};
struct Entry4 {
  int i, j, k, l;
  double v;
};

// A forcing term is either kappa * M * phi_mode (mass-normalised undamped
// mode, 0-based index) or a single nodal entry.
struct ForcingTerm {
  enum class Kind { mode, vector } kind = Kind::mode;
  int index = 0;
  double value = 0.0;
};

// M qdd + C qd + K q + G(q,q) + H(q,q,q) = eps * F cos(Omega t)
struct MechModel {
  std::string name;
  int N = 0;
  Eigen::MatrixXd M, C, K;
  // Fully symmetrised coordinate lists (every slot permutation stored).
  std::vector<Entry3> G;
  std::vector<Entry4> H;
  std::vector<ForcingTerm> forcing;

  // Output normalisation. phi_max <= 0 means "max |component| of the
  // observed mode".
  double phi_max = 0.0;
  double L_CH = 1.0;
  // Optional physical shapes (beam generator): shapes(x_i, mode).
  Eigen::VectorXd shape_grid;
  Eigen::MatrixXd shapes;

  void validate() const;
};

// Raw tensors are averaged over slot permutations of (j,k) / (j,k,l).
std::vector<Entry3> symmetrise_G(const std::vector<Entry3>& raw);
std::vector<Entry4> symmetrise_H(const std::vector<Entry4>& raw);

MechModel load_model(const std::string& path);
MechModel parse_model(const std::string& text, const std::string& name = "model");
void export_csv(const MechModel& m, const std::string& dir);

MechModel builtin_duffing(double omega0, double xi, double g, double h);

enum class BeamBC { simply_supported, clamped_clamped };
BeamBC parse_bc(const std::string& s);

MechModel builtin_vk_beam(int n_modes, double L, double H, double B, double E, double rho, BeamBC bc);

// C = alpha M + beta K
void apply_rayleigh(MechModel& m, double alpha, double beta);

double epsilon_load(double kappa, double phi_max, double L_CH, double omega);

struct UndampedModes {
  Eigen::VectorXd omega;
  Eigen::MatrixXd phi;  // mass normalised, largest component positive
};
UndampedModes undamped_modes(const MechModel& m);

// Spatial forcing vector F, with E+ = E- = F / 2.
Eigen::VectorXd forcing_shape(const MechModel& m);

// Normalisation factor phi_max / L_CH for the observed mode.
double amplitude_scale(const MechModel& m, const Eigen::VectorXd& phi_obs);

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> eval_G(const MechModel& m, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u,
                                           const Eigen::Matrix<S, Eigen::Dynamic, 1>& v) {
  using Real = typename Eigen::NumTraits<S>::Real;
  if (u.size() != m.N || v.size() != m.N) throw std::invalid_argument("eval_G: dimension mismatch");
  Eigen::Matrix<S, Eigen::Dynamic, 1> r = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(m.N);
  for (const auto& e : m.G) r[e.i] += Real(e.v) * u[e.j] * v[e.k];
  return r;
}

template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> eval_H(const MechModel& m, const Eigen::Matrix<S, Eigen::Dynamic, 1>& u,
                                           const Eigen::Matrix<S, Eigen::Dynamic, 1>& v,
                                           const Eigen::Matrix<S, Eigen::Dynamic, 1>& w) {
  using Real = typename Eigen::NumTraits<S>::Real;
  if (u.size() != m.N || v.size() != m.N || w.size() != m.N) throw std::invalid_argument("eval_H: dimension mismatch");
  Eigen::Matrix<S, Eigen::Dynamic, 1> r = Eigen::Matrix<S, Eigen::Dynamic, 1>::Zero(m.N);
  for (const auto& e : m.H) r[e.i] += Real(e.v) * u[e.j] * v[e.k] * w[e.l];
  return r;
}

// Jacobian of G(q,q) + H(q,q,q) at a real state.
Eigen::MatrixXd nonlinear_jacobian(const MechModel& m, const Eigen::VectorXd& q);

}  // namespace dpim
