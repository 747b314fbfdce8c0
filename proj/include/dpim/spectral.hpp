#pragma once

#include <string>
#include <vector>

#include "dpim/model.hpp"
#include "dpim/scalar.hpp"

namespace dpim {

// Master block of the first-order eigenstructure. Columns are ordered
// lambda_1..lambda_n followed by their conjugates; X and Y satisfy
// X^* B Y = I with B = diag(M, M) and first-order state [V; U].
template <class R>
struct MasterBasisT {
  int N = 0;
  int n = 0;
  std::vector<int> modes;  // 0-based mode numbers of the masters
  VecC<R> lambda;
  MatC<R> YU, YV, XU, XV;
  VecR<R> omega, xi;
  bool real_mode = false;

  int n_cols() const { return 2 * n; }
  // Column holding the conjugate partner of column r.
  int partner(int r) const { return r < n ? r + n : r - n; }
};
using MasterBasis = MasterBasisT<double>;

template <class R>
MasterBasisT<R> solve_real_mode_basis(const MechModel& m, const std::vector<int>& master);

// Full 2N spectrum of the linearised first-order system.
struct FullSpectrum {
  Eigen::VectorXcd lambda;  // lambda_1..lambda_N then conjugates
  Eigen::MatrixXcd Y;       // 2N x 2N right eigenvectors [V; U]
  Eigen::MatrixXcd X;       // left eigenvectors, X^* B Y = I
};

FullSpectrum dense_spectrum(const MechModel& m, int dense_cap = 500);
MasterBasis solve_dense_linearized(const MechModel& m, const std::vector<int>& master, int dense_cap = 500);
MasterBasis basis_from_spectrum(const FullSpectrum& s, int N, const std::vector<int>& master);

// Modes (0-based) whose undamped frequency lies in [lo, hi].
std::vector<int> select_by_frequency(const MechModel& m, double lo, double hi);

struct EigenIdentityReport {
  double right = 0;        // (lambda^2 M + lambda C + K) Y^U
  double velocity = 0;     // Y^V - lambda Y^U
  double left_link = 0;    // M X^U - (conj(lambda) M + C) X^V
  double left = 0;         // (conj(lambda)^2 M + conj(lambda) C + K) X^V
  double real_mode = 0;    // (lambda M + C) phi + conj(lambda) M phi
  double biorth = 0;       // X^* B Y - I over the master block
  double max() const;
};

EigenIdentityReport eigen_identities(const MechModel& m, const MasterBasis& b);

std::string spectrum_json(const MechModel& m, const FullSpectrum* dense, const MasterBasis& b);

}  // namespace dpim
