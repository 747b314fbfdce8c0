#include "dpim/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

namespace dpim {

namespace {

constexpr double kSymTol = 1e-10;

bool symmetric(const Eigen::MatrixXd& A) {
  const double s = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() <= kSymTol * s;
}

}  // namespace

std::vector<Entry3> symmetrise_G(const std::vector<Entry3>& raw) {
  std::map<std::array<int, 3>, double> acc;
  for (const auto& e : raw) {
    acc[{e.i, e.j, e.k}] += 0.5 * e.v;
    acc[{e.i, e.k, e.j}] += 0.5 * e.v;
  }
  std::vector<Entry3> out;
  for (const auto& [key, v] : acc)
    if (v != 0.0) out.push_back({key[0], key[1], key[2], v});
  return out;
}

std::vector<Entry4> symmetrise_H(const std::vector<Entry4>& raw) {
  std::map<std::array<int, 4>, double> acc;
  for (const auto& e : raw) {
    const std::array<int, 3> s{e.j, e.k, e.l};
    std::array<int, 3> pos{0, 1, 2};
    do {
      acc[{e.i, s[pos[0]], s[pos[1]], s[pos[2]]}] += e.v / 6.0;
    } while (std::next_permutation(pos.begin(), pos.end()));
  }
  std::vector<Entry4> out;
  for (const auto& [key, v] : acc)
    if (v != 0.0) out.push_back({key[0], key[1], key[2], key[3], v});
  return out;
}

void MechModel::validate() const {
  if (N < 1) throw std::runtime_error("model: no degrees of freedom");
  if (M.rows() != N || M.cols() != N || K.rows() != N || K.cols() != N || C.rows() != N || C.cols() != N)
    throw std::runtime_error("model: dimension mismatch in M, C, K");
  if (!symmetric(M)) throw std::runtime_error("model: M is not symmetric");
  if (!symmetric(K)) throw std::runtime_error("model: K is not symmetric");
  if (!symmetric(C)) throw std::runtime_error("model: C is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw std::runtime_error("model: mass matrix is not positive definite");
  for (const auto& e : G)
    if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= N || e.j >= N || e.k >= N)
      throw std::runtime_error("model: G index out of range");
  for (const auto& e : H)
    if (e.i < 0 || e.j < 0 || e.k < 0 || e.l < 0 || e.i >= N || e.j >= N || e.k >= N || e.l >= N)
      throw std::runtime_error("model: H index out of range");
  for (const auto& f : forcing)
    if (f.index < 0 || f.index >= N) throw std::runtime_error("model: forcing index out of range");
}

MechModel parse_model(const std::string& text, const std::string& name) {
  struct Mat {
    std::vector<std::tuple<int, int, double>> e;
  };
  Mat mm, cc, kk;
  std::vector<Entry3> g;
  std::vector<Entry4> h;
  std::vector<ForcingTerm> forcing;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int nmax = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(name + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      if (first.back() != ']') fail("malformed section header");
      section = first.substr(1, first.size() - 2);
      if (section != "M" && section != "C" && section != "K" && section != "G" && section != "H" &&
          section != "FORCING")
        fail("unknown section [" + section + "]");
      continue;
    }
    if (section.empty()) fail("entry outside of a section");
    std::istringstream es(line);
    auto read_idx = [&](int& v) {
      if (!(es >> v)) fail("expected integer index");
      if (v < 1) fail("indices are 1-based");
      --v;
      nmax = std::max(nmax, v + 1);
    };
    auto read_val = [&](double& v) {
      if (!(es >> v)) fail("expected numeric value");
    };
    auto finish = [&] {
      std::string extra;
      if (es >> extra) fail("trailing tokens");
    };
    if (section == "M" || section == "C" || section == "K") {
      int i, j;
      double v;
      read_idx(i);
      read_idx(j);
      read_val(v);
      finish();
      (section == "M" ? mm : section == "C" ? cc : kk).e.emplace_back(i, j, v);
    } else if (section == "G") {
      Entry3 e{};
      read_idx(e.i);
      read_idx(e.j);
      read_idx(e.k);
      read_val(e.v);
      finish();
      g.push_back(e);
    } else if (section == "H") {
      Entry4 e{};
      read_idx(e.i);
      read_idx(e.j);
      read_idx(e.k);
      read_idx(e.l);
      read_val(e.v);
      finish();
      h.push_back(e);
    } else {
      std::string kind;
      es >> kind;
      ForcingTerm f;
      if (kind == "mode")
        f.kind = ForcingTerm::Kind::mode;
      else if (kind == "vector")
        f.kind = ForcingTerm::Kind::vector;
      else
        fail("forcing entry must start with 'mode' or 'vector'");
      read_idx(f.index);
      read_val(f.value);
      finish();
      forcing.push_back(f);
    }
  }
  if (mm.e.empty()) throw std::runtime_error(name + ": missing [M] section");
  int n = 0;
  for (auto& [i, j, v] : mm.e) n = std::max({n, i + 1, j + 1});
  if (nmax > n) throw std::runtime_error(name + ": dimension mismatch, index " + std::to_string(nmax) +
                                         " exceeds mass matrix size " + std::to_string(n));
  auto assemble = [&](const Mat& src) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(n, n);
    for (auto& [i, j, v] : src.e) {
      A(i, j) += v;
      seen(i, j) = 1;
    }
    // An off-diagonal entry without its mirror is mirrored.
    for (auto& [i, j, v] : src.e)
      if (i != j && !seen(j, i)) A(j, i) = A(i, j);
    return A;
  };
  MechModel m;
  m.name = name;
  m.N = n;
  m.M = assemble(mm);
  m.C = assemble(cc);
  m.K = assemble(kk);
  m.G = symmetrise_G(g);
  m.H = symmetrise_H(h);
  m.forcing = forcing;
  m.validate();
  return m;
}

MechModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open model file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model(ss.str(), path);
}

void export_csv(const MechModel& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto dense = [&](const Eigen::MatrixXd& A, const std::string& file) {
    std::ofstream o(std::filesystem::path(dir) / file);
    o.precision(17);
    for (int i = 0; i < A.rows(); ++i) {
      for (int j = 0; j < A.cols(); ++j) o << (j ? "," : "") << A(i, j);
      o << '\n';
    }
  };
  dense(m.M, "M.csv");
  dense(m.C, "C.csv");
  dense(m.K, "K.csv");
  std::ofstream g(std::filesystem::path(dir) / "G.csv");
  g.precision(17);
  g << "i,j,k,value\n";
  for (const auto& e : m.G) g << e.i + 1 << ',' << e.j + 1 << ',' << e.k + 1 << ',' << e.v << '\n';
  std::ofstream h(std::filesystem::path(dir) / "H.csv");
  h.precision(17);
  h << "i,j,k,l,value\n";
  for (const auto& e : m.H) h << e.i + 1 << ',' << e.j + 1 << ',' << e.k + 1 << ',' << e.l + 1 << ',' << e.v << '\n';
}

MechModel builtin_duffing(double omega0, double xi, double g, double h) {
  if (!(omega0 > 0)) throw std::invalid_argument("duffing: omega0 must be positive");
  if (xi < 0) throw std::invalid_argument("duffing: xi must be non-negative");
  MechModel m;
  m.name = "duffing";
  m.N = 1;
  m.M = Eigen::MatrixXd::Ones(1, 1);
  m.C = Eigen::MatrixXd::Constant(1, 1, 2 * xi * omega0);
  m.K = Eigen::MatrixXd::Constant(1, 1, omega0 * omega0);
  if (g != 0) m.G = {{0, 0, 0, g}};
  if (h != 0) m.H = {{0, 0, 0, 0, h}};
  m.forcing = {{ForcingTerm::Kind::mode, 0, 1.0}};
  m.validate();
  return m;
}

BeamBC parse_bc(const std::string& s) {
  if (s == "ss" || s == "simply_supported" || s == "SS") return BeamBC::simply_supported;
  if (s == "cc" || s == "clamped_clamped" || s == "CC") return BeamBC::clamped_clamped;
  throw std::invalid_argument("unsupported boundary condition '" + s + "'");
}

namespace {

struct BeamShape {
  double beta;   // wavenumber
  double sigma;  // clamped mode parameter
  double one_minus_sigma;
  BeamBC bc;
  double L;

  // Shape and slope before mass normalisation.
  double value(double x) const {
    if (bc == BeamBC::simply_supported) return std::sin(beta * x);
    const double bx = beta * x;
    // cosh - sigma sinh written with exponentials to avoid cancellation.
    const double hyp = 0.5 * (1 + sigma) * std::exp(-bx) + 0.5 * one_minus_sigma * std::exp(bx);
    return hyp - std::cos(bx) + sigma * std::sin(bx);
  }
  double slope(double x) const {
    if (bc == BeamBC::simply_supported) return beta * std::cos(beta * x);
    const double bx = beta * x;
    const double hyp = 0.5 * one_minus_sigma * std::exp(bx) - 0.5 * (1 + sigma) * std::exp(-bx);
    return beta * (hyp + std::sin(bx) + sigma * std::cos(bx));
  }
};

double clamped_root(int k) {
  const double pi = boost::math::constants::pi<double>();
  const double c = (k + 0.5) * pi;
  auto f = [](double x) { return std::cos(x) - 1.0 / std::cosh(x); };
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t it = 200;
  auto r = boost::math::tools::toms748_solve(f, c - 0.3, c + 0.3, tol, it);
  return 0.5 * (r.first + r.second);
}

template <class F>
double integrate(F&& f, double L, int panels) {
  double s = 0;
  const double h = L / panels;
  for (int p = 0; p < panels; ++p)
    s += boost::math::quadrature::gauss<double, 20>::integrate(f, p * h, (p + 1) * h);
  return s;
}

}  // namespace

MechModel builtin_vk_beam(int n_modes, double L, double Ht, double B, double E, double rho, BeamBC bc) {
  if (n_modes < 1) throw std::invalid_argument("vk_beam: n_modes must be >= 1");
  if (!(L > 0 && Ht > 0 && B > 0 && E > 0 && rho > 0)) throw std::invalid_argument("vk_beam: parameters must be positive");
  const double pi = boost::math::constants::pi<double>();
  const double A = B * Ht;
  const double J = B * Ht * Ht * Ht / 12.0;
  std::vector<BeamShape> shapes;
  std::vector<double> scale;
  for (int k = 1; k <= n_modes; ++k) {
    BeamShape s{};
    s.bc = bc;
    s.L = L;
    if (bc == BeamBC::simply_supported) {
      s.beta = k * pi / L;
    } else {
      const double bl = clamped_root(k);
      s.beta = bl / L;
      const double den = std::sinh(bl) - std::sin(bl);
      s.sigma = (std::cosh(bl) - std::cos(bl)) / den;
      s.one_minus_sigma = (std::cos(bl) - std::sin(bl) - std::exp(-bl)) / den;
    }
    shapes.push_back(s);
  }
  const int panels = 8 * n_modes + 16;
  for (auto& s : shapes) {
    const double m2 = integrate([&](double x) { return rho * A * s.value(x) * s.value(x); }, L, panels);
    // Sign chosen so the largest sampled deflection is positive.
    double big = 0;
    for (int i = 0; i <= 400; ++i) {
      const double v = s.value(L * i / 400.0);
      if (std::abs(v) > std::abs(big)) big = v;
    }
    scale.push_back((big < 0 ? -1.0 : 1.0) / std::sqrt(m2));
  }
  Eigen::MatrixXd S(n_modes, n_modes);
  for (int j = 0; j < n_modes; ++j)
    for (int k = j; k < n_modes; ++k) {
      S(j, k) = scale[j] * scale[k] *
                integrate([&](double x) { return shapes[j].slope(x) * shapes[k].slope(x); }, L, panels);
      S(k, j) = S(j, k);
    }
  MechModel m;
  m.name = bc == BeamBC::simply_supported ? "vk_beam_ss" : "vk_beam_cc";
  m.N = n_modes;
  m.M = Eigen::MatrixXd::Identity(n_modes, n_modes);
  m.C = Eigen::MatrixXd::Zero(n_modes, n_modes);
  m.K = Eigen::MatrixXd::Zero(n_modes, n_modes);
  for (int k = 0; k < n_modes; ++k) {
    const double b = shapes[k].beta;
    m.K(k, k) = E * J * b * b * b * b / (rho * A);
  }
  // Membrane stretching: h_ijkl = EA/(2L) S_il S_jk before symmetrisation.
  std::vector<Entry4> raw;
  const double c = E * A / (2 * L);
  for (int i = 0; i < n_modes; ++i)
    for (int j = 0; j < n_modes; ++j)
      for (int k = 0; k < n_modes; ++k)
        for (int l = 0; l < n_modes; ++l) {
          const double v = c * S(i, l) * S(j, k);
          if (std::abs(v) > 1e-14 * c * S(0, 0) * S(0, 0)) raw.push_back({i, j, k, l, v});
        }
  m.H = symmetrise_H(raw);
  m.forcing = {{ForcingTerm::Kind::mode, 0, 1.0}};
  const int npts = 401;
  m.shape_grid = Eigen::VectorXd::LinSpaced(npts, 0.0, L);
  m.shapes.resize(npts, n_modes);
  for (int i = 0; i < npts; ++i)
    for (int k = 0; k < n_modes; ++k) m.shapes(i, k) = scale[k] * shapes[k].value(m.shape_grid[i]);
  m.phi_max = m.shapes.col(0).cwiseAbs().maxCoeff();
  m.L_CH = Ht;
  m.validate();
  return m;
}

void apply_rayleigh(MechModel& m, double alpha, double beta) { m.C = alpha * m.M + beta * m.K; }

double epsilon_load(double kappa, double phi_max, double L_CH, double omega) {
  if (!(kappa > 0 && phi_max > 0 && L_CH > 0 && omega > 0))
    throw std::invalid_argument("epsilon_load: arguments must be positive");
  return phi_max / L_CH * kappa / (omega * omega);
}

UndampedModes undamped_modes(const MechModel& m) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(m.K, m.M);
  if (es.info() != Eigen::Success) throw std::runtime_error("undamped eigenproblem failed");
  UndampedModes out;
  out.omega = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  out.phi = es.eigenvectors();
  for (int k = 0; k < m.N; ++k) {
    out.phi.col(k) /= std::sqrt(out.phi.col(k).dot(m.M * out.phi.col(k)));
    Eigen::Index imax;
    out.phi.col(k).cwiseAbs().maxCoeff(&imax);
    if (out.phi(imax, k) < 0) out.phi.col(k) *= -1;
  }
  return out;
}

Eigen::VectorXd forcing_shape(const MechModel& m) {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(m.N);
  bool need_modes = false;
  for (const auto& t : m.forcing) need_modes |= t.kind == ForcingTerm::Kind::mode;
  UndampedModes modes;
  if (need_modes) modes = undamped_modes(m);
  for (const auto& t : m.forcing) {
    if (t.kind == ForcingTerm::Kind::mode)
      F += t.value * (m.M * modes.phi.col(t.index));
    else
      F[t.index] += t.value;
  }
  return F;
}

double amplitude_scale(const MechModel& m, const Eigen::VectorXd& phi_obs) {
  const double pm = m.phi_max > 0 ? m.phi_max : phi_obs.cwiseAbs().maxCoeff();
  return pm / m.L_CH;
}

Eigen::MatrixXd nonlinear_jacobian(const MechModel& m, const Eigen::VectorXd& q) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m.N, m.N);
  for (const auto& e : m.G) J(e.i, e.j) += 2 * e.v * q[e.k];
  for (const auto& e : m.H) J(e.i, e.j) += 3 * e.v * q[e.k] * q[e.l];
  return J;
}

}  // namespace dpim
