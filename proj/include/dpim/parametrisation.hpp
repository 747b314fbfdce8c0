#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpim/model.hpp"
#include "dpim/polyalgebra.hpp"
#include "dpim/scalar.hpp"
#include "dpim/spectral.hpp"

namespace dpim {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kForcingVars = 2;

enum class Style { graph, cnf, rnf };
std::string to_string(Style s);
Style parse_style(const std::string& s);

enum class Reason { exact_trivial, near_resonant, graph_forced };
std::string to_string(Reason r);

struct ResonanceSet {
  MultiIndex alpha;
  cd sigma;
  std::vector<int> members;  // master columns, 0-based
  std::vector<Reason> reasons;
  // Set when a member's real part differs from Re(sigma) by more than eta |lambda|.
  bool real_part_flag = false;
};

enum class SolverKind { bordered, modal_oracle, cnf_fast };

template <class R>
struct EntryT {
  MultiIndex alpha;
  int p = 0;
  int pf = 0;
  std::complex<R> sigma;
  std::vector<int> R_set;
  VecC<R> Psi, Ups;
  VecC<R> f;  // master rows only
  VecC<R> nu, mu;
};

struct OrderStats {
  int order = 0;
  int monomials = 0;
  double seconds = 0;
};

template <class R>
struct ParametrisationT {
  Style style = Style::cnf;
  TruncationRule rule;
  double eta = 0.1;
  R Omega = R(0);
  MechModel model;
  MasterBasisT<R> basis;
  VecC<R> Eplus, Eminus;
  std::vector<EntryT<R>> entries;
  std::unordered_map<MultiIndex, int, MultiIndexHash> index;
  std::vector<ResonanceSet> log;
  std::vector<OrderStats> stats;
  double max_projection_error = 0;

  int n_vars() const { return 2 * basis.n + kForcingVars; }
  int plus_var() const { return 2 * basis.n; }
  int minus_var() const { return 2 * basis.n + 1; }
  const EntryT<R>* find(const MultiIndex& a) const {
    auto it = index.find(a);
    return it == index.end() ? nullptr : &entries[it->second];
  }
};
using Parametrisation = ParametrisationT<double>;

struct ParamOptions {
  Style style = Style::cnf;
  TruncationRule rule;
  double eta = 0.1;
  double Omega = 1.0;
  SolverKind solver = SolverKind::bordered;
  const FullSpectrum* spectrum = nullptr;  // required by the modal oracle
  int threads = 1;
};

// Swap each master pair and z+ <-> z-.
MultiIndex conjugate_index(const MultiIndex& a, int n);

template <class R>
std::complex<R> sigma(const MultiIndex& a, const MasterBasisT<R>& b, R Omega);

template <class R>
ResonanceSet resonance_set(const MultiIndex& a, const MasterBasisT<R>& b, R Omega, Style style, double eta);

// Known part of the order-p homological equation.
template <class R>
void assemble_rhs(const ParametrisationT<R>& P, const MultiIndex& a, VecC<R>& nu, VecC<R>& mu);

// Cache of bordered factorizations keyed by (sigma, R).
template <class R>
class BorderedCache {
 public:
  struct Item {
    std::complex<R> sigma;
    std::vector<int> R_set;
    std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> lu;
  };
  std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> get(const std::complex<R>& s, const std::vector<int>& Rs);
  void put(const std::complex<R>& s, const std::vector<int>& Rs, std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> lu);

 private:
  std::mutex mtx_;
  std::vector<Item> items_;
};

template <class R>
struct SolveResult {
  VecC<R> Psi, Ups, f;
};

template <class R>
SolveResult<R> solve_orderp(const MechModel& m, const MasterBasisT<R>& b, const std::complex<R>& sigma,
                            const std::vector<int>& Rs, const VecC<R>& nu, const VecC<R>& mu,
                            BorderedCache<R>* cache = nullptr);

// Diagonalised solve in the full eigenbasis; Psi/Ups mapped back to physical space.
SolveResult<double> modal_oracle_solve(const MechModel& m, const MasterBasis& b, const FullSpectrum& s, cd sigma,
                                       const std::vector<int>& Rs, const Eigen::VectorXcd& nu,
                                       const Eigen::VectorXcd& mu);

// Single real-mode master, |R| <= 1, scalar border.
SolveResult<double> cnf_single_master_solve(const MechModel& m, const MasterBasis& b, cd sigma,
                                            const std::vector<int>& Rs, const Eigen::VectorXcd& nu,
                                            const Eigen::VectorXcd& mu);

template <class R>
ParametrisationT<R> compute_parametrisation(const MechModel& m, const MasterBasisT<R>& b, const ParamOptions& opt,
                                            const ParametrisationT<R>* reuse_autonomous = nullptr);

template <class R>
struct ResidualSample {
  VecC<R> z;  // 2n master coordinates
  R phase = R(0);
  R eps = R(0);
};

template <class R>
std::vector<R> invariance_residual(const ParametrisationT<R>& P, const std::vector<ResidualSample<R>>& samples);

// Full coordinate vector (masters, z+, z-) for a sample.
template <class R>
VecC<R> full_coordinates(const ParametrisationT<R>& P, const VecC<R>& z, R phase, R eps);

std::string parametrisation_json(const Parametrisation& P);
std::string resonance_log_text(const Parametrisation& P);

// Order-1 forcing coefficients appended to a purely autonomous expansion.
void append_linear_forcing(Parametrisation& P);

}  // namespace dpim
