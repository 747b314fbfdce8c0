#include "dpim/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace dpim {

template <class R>
MasterBasisT<R> solve_real_mode_basis(const MechModel& m, const std::vector<int>& master) {
  using std::abs;
  using std::sqrt;
  using C = std::complex<R>;
  m.validate();
  if (master.empty()) throw std::invalid_argument("real-mode basis: empty master set");
  const MatR<R> M = m.M.cast<R>();
  const MatR<R> K = m.K.cast<R>();
  const MatR<R> Cd = m.C.cast<R>();
  Eigen::GeneralizedSelfAdjointEigenSolver<MatR<R>> es(K, M);
  if (es.info() != Eigen::Success) throw std::runtime_error("real-mode basis: eigensolver failed");
  MatR<R> phi = es.eigenvectors();
  for (int k = 0; k < m.N; ++k) {
    phi.col(k) /= sqrt(R(phi.col(k).dot(M * phi.col(k))));
    Eigen::Index imax;
    phi.col(k).cwiseAbs().maxCoeff(&imax);
    if (phi(imax, k) < 0) phi.col(k) *= R(-1);
  }
  const MatR<R> cm = phi.transpose() * Cd * phi;
  const double diag_scale = std::max(1.0, to_double(R(cm.diagonal().cwiseAbs().maxCoeff())));
  for (int i = 0; i < m.N; ++i)
    for (int j = 0; j < m.N; ++j)
      if (i != j && to_double(R(abs(cm(i, j)))) > 1e-8 * diag_scale)
        throw std::runtime_error(
            "real-mode basis: damping is not diagonalised by the undamped modes; use the dense path");

  MasterBasisT<R> b;
  b.N = m.N;
  b.n = static_cast<int>(master.size());
  b.modes = master;
  b.real_mode = true;
  b.lambda.resize(2 * b.n);
  b.omega.resize(b.n);
  b.xi.resize(b.n);
  b.YU.resize(m.N, 2 * b.n);
  b.YV.resize(m.N, 2 * b.n);
  b.XU.resize(m.N, 2 * b.n);
  b.XV.resize(m.N, 2 * b.n);
  for (int j = 0; j < b.n; ++j) {
    const int k = master[j];
    if (k < 0 || k >= m.N) throw std::out_of_range("real-mode basis: master index out of range");
    const R w2 = es.eigenvalues()[k];
    if (!(w2 > 0)) throw std::runtime_error("real-mode basis: non-positive stiffness eigenvalue");
    const R w = sqrt(w2);
    const R xi = cm(k, k) / (2 * w);
    if (xi >= 1) throw std::runtime_error("real-mode basis: overdamped master mode");
    b.omega[j] = w;
    b.xi[j] = xi;
    const C lam(-xi * w, w * sqrt(1 - xi * xi));
    b.lambda[j] = lam;
    b.lambda[j + b.n] = std::conj(lam);
    for (int c : {j, j + b.n}) {
      const C l = b.lambda[c];
      const C x = C(1) / (std::conj(l) - l);
      const VecC<R> ph = phi.col(k).template cast<C>();
      b.YU.col(c) = ph;
      b.YV.col(c) = l * ph;
      b.XV.col(c) = x * ph;
      b.XU.col(c) = -l * x * ph;
    }
  }
  return b;
}

template MasterBasisT<double> solve_real_mode_basis<double>(const MechModel&, const std::vector<int>&);
template MasterBasisT<quad> solve_real_mode_basis<quad>(const MechModel&, const std::vector<int>&);

FullSpectrum dense_spectrum(const MechModel& m, int dense_cap) {
  m.validate();
  const int N = m.N;
  if (N > dense_cap) throw std::runtime_error("dense path: model exceeds the dense size cap");
  Eigen::MatrixXd Minv = m.M.inverse();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * N, 2 * N);
  S.topLeftCorner(N, N) = -Minv * m.C;
  S.topRightCorner(N, N) = -Minv * m.K;
  S.bottomLeftCorner(N, N).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense path: eigensolver failed");
  const Eigen::VectorXcd ev = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();
  const double scale = ev.cwiseAbs().maxCoeff();
  std::vector<int> upper;
  for (int i = 0; i < 2 * N; ++i) {
    if (ev[i].real() > 1e-12 * scale) throw std::runtime_error("dense path: unstable eigenvalue (Re > 0)");
    if (std::abs(ev[i].imag()) <= 1e-12 * scale)
      throw std::runtime_error("dense path: real (overdamped) eigenvalue is not supported");
    if (ev[i].imag() > 0) upper.push_back(i);
  }
  if (static_cast<int>(upper.size()) != N) throw std::runtime_error("dense path: eigenvalues do not pair");
  const double tie = 1e-9 * scale;
  std::sort(upper.begin(), upper.end(), [&](int a, int b) {
    if (std::abs(ev[a].real() - ev[b].real()) > tie) return ev[a].real() > ev[b].real();
    return ev[a].imag() < ev[b].imag();
  });
  FullSpectrum s;
  s.lambda.resize(2 * N);
  s.Y.resize(2 * N, 2 * N);
  for (int j = 0; j < N; ++j) {
    const cd l = ev[upper[j]];
    Eigen::VectorXcd u = V.col(upper[j]).tail(N);
    const double nrm = std::sqrt(std::abs(u.dot(m.M * u)));
    u /= nrm;
    Eigen::Index imax;
    u.cwiseAbs().maxCoeff(&imax);
    u *= std::abs(u[imax]) / u[imax];
    u[imax] = std::abs(u[imax]);
    s.lambda[j] = l;
    s.lambda[j + N] = std::conj(l);
    s.Y.col(j) << l * u, u;
    s.Y.col(j + N) = s.Y.col(j).conjugate();
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.Y);
  const auto sv = svd.singularValues();
  if (sv[sv.size() - 1] <= 1e-12 * sv[0]) throw std::runtime_error("dense path: defective eigenvalue detected");
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
  B.topLeftCorner(N, N) = m.M.cast<cd>();
  B.bottomRightCorner(N, N) = m.M.cast<cd>();
  // X^* = Y^{-1} B^{-1}
  const Eigen::MatrixXcd Xs = s.Y.partialPivLu().solve(B.partialPivLu().inverse());
  s.X = Xs.adjoint();
  return s;
}

MasterBasis basis_from_spectrum(const FullSpectrum& s, int N, const std::vector<int>& master) {
  if (master.empty()) throw std::invalid_argument("dense path: empty master set");
  MasterBasis b;
  b.N = N;
  b.n = static_cast<int>(master.size());
  b.modes = master;
  b.lambda.resize(2 * b.n);
  b.omega.resize(b.n);
  b.xi.resize(b.n);
  b.YU.resize(N, 2 * b.n);
  b.YV.resize(N, 2 * b.n);
  b.XU.resize(N, 2 * b.n);
  b.XV.resize(N, 2 * b.n);
  for (int j = 0; j < b.n; ++j) {
    const int k = master[j];
    if (k < 0 || k >= N) throw std::out_of_range("dense path: master index out of range");
    for (int half = 0; half < 2; ++half) {
      const int src = k + half * N;
      const int dst = j + half * b.n;
      b.lambda[dst] = s.lambda[src];
      b.YV.col(dst) = s.Y.col(src).head(N);
      b.YU.col(dst) = s.Y.col(src).tail(N);
      b.XV.col(dst) = s.X.col(src).head(N);
      b.XU.col(dst) = s.X.col(src).tail(N);
    }
    b.omega[j] = std::abs(s.lambda[k]);
    b.xi[j] = -s.lambda[k].real() / b.omega[j];
  }
  return b;
}

MasterBasis solve_dense_linearized(const MechModel& m, const std::vector<int>& master, int dense_cap) {
  return basis_from_spectrum(dense_spectrum(m, dense_cap), m.N, master);
}

std::vector<int> select_by_frequency(const MechModel& m, double lo, double hi) {
  const auto modes = undamped_modes(m);
  std::vector<int> out;
  for (int k = 0; k < m.N; ++k)
    if (modes.omega[k] >= lo && modes.omega[k] <= hi) out.push_back(k);
  return out;
}

double EigenIdentityReport::max() const { return std::max({right, velocity, left_link, left, real_mode, biorth}); }

EigenIdentityReport eigen_identities(const MechModel& m, const MasterBasis& b) {
  EigenIdentityReport r;
  const Eigen::MatrixXcd M = m.M.cast<cd>(), C = m.C.cast<cd>(), K = m.K.cast<cd>();
  const double nM = m.M.norm(), nC = m.C.norm(), nK = m.K.norm();
  for (int c = 0; c < b.n_cols(); ++c) {
    const cd l = b.lambda[c];
    const cd lc = std::conj(l);
    const double a = std::abs(l);
    const double op = a * a * nM + a * nC + nK;
    const auto& yu = b.YU.col(c);
    const auto& yv = b.YV.col(c);
    const auto& xu = b.XU.col(c);
    const auto& xv = b.XV.col(c);
    r.right = std::max(r.right, ((l * l * M + l * C + K) * yu).norm() / (op * yu.norm()));
    r.velocity = std::max(r.velocity, (yv - l * yu).norm() / yv.norm());
    r.left_link =
        std::max(r.left_link, (M * xu - (lc * M + C) * xv).norm() / ((a * nM + nC) * xv.norm() + nM * xu.norm()));
    r.left = std::max(r.left, ((lc * lc * M + lc * C + K) * xv).norm() / (op * xv.norm()));
    if (b.real_mode)
      r.real_mode = std::max(r.real_mode, ((l * M + C) * yu + lc * (M * yu)).norm() / ((a * nM + nC) * yu.norm()));
  }
  const Eigen::MatrixXcd P = b.XV.adjoint() * M * b.YV + b.XU.adjoint() * M * b.YU;
  r.biorth = (P - Eigen::MatrixXcd::Identity(b.n_cols(), b.n_cols())).cwiseAbs().maxCoeff();
  return r;
}

std::string spectrum_json(const MechModel& m, const FullSpectrum* dense, const MasterBasis& b) {
  using nlohmann::json;
  const double two_pi = 2 * std::acos(-1.0);
  json j;
  j["model"] = m.name;
  j["N"] = m.N;
  auto mode_entry = [&](int idx, cd l) {
    const double w = std::abs(l);
    return json{{"index", idx + 1},
                {"lambda_re", l.real()},
                {"lambda_im", l.imag()},
                {"omega", w},
                {"frequency", w / two_pi},
                {"xi", -l.real() / w}};
  };
  json masters = json::array();
  for (int j2 = 0; j2 < b.n; ++j2) masters.push_back(mode_entry(b.modes[j2], b.lambda[j2]));
  j["masters"] = masters;
  json all = json::array();
  if (dense) {
    for (int k = 0; k < m.N; ++k) all.push_back(mode_entry(k, dense->lambda[k]));
  } else {
    const auto um = undamped_modes(m);
    for (int k = 0; k < m.N; ++k) {
      const double w = um.omega[k];
      const double xi = um.phi.col(k).dot(m.C * um.phi.col(k)) / (2 * w);
      all.push_back(mode_entry(k, cd(-xi * w, w * std::sqrt(std::max(0.0, 1 - xi * xi)))));
    }
  }
  j["modes"] = all;
  return j.dump(2);
}

}  // namespace dpim
