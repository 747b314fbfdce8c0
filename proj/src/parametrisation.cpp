#include "dpim/parametrisation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <type_traits>

#include <json.hpp>

namespace dpim {

std::string to_string(Style s) {
  switch (s) {
    case Style::graph:
      return "graph";
    case Style::cnf:
      return "cnf";
    case Style::rnf:
      return "rnf";
  }
  return "?";
}

Style parse_style(const std::string& s) {
  if (s == "graph") return Style::graph;
  if (s == "cnf" || s == "CNF") return Style::cnf;
  if (s == "rnf" || s == "RNF") return Style::rnf;
  throw std::invalid_argument("unknown style '" + s + "'");
}

std::string to_string(Reason r) {
  switch (r) {
    case Reason::exact_trivial:
      return "exact-trivial";
    case Reason::near_resonant:
      return "near-resonant";
    case Reason::graph_forced:
      return "graph-forced";
  }
  return "?";
}

MultiIndex conjugate_index(const MultiIndex& a, int n) {
  MultiIndex c = a;
  for (int j = 0; j < n; ++j) std::swap(c[j], c[j + n]);
  std::swap(c[2 * n], c[2 * n + 1]);
  return c;
}

namespace {

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class R>
R singular_threshold() {
  return R(1e3) * std::numeric_limits<R>::epsilon();
}

template <class R>
bool is_zero(const VecC<R>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != std::complex<R>(0)) return false;
  return true;
}

}  // namespace

template <class R>
std::complex<R> sigma(const MultiIndex& a, const MasterBasisT<R>& b, R Omega) {
  std::complex<R> s(0);
  for (int k = 0; k < 2 * b.n; ++k)
    if (a[k]) s += R(a[k]) * b.lambda[k];
  const int net = a[2 * b.n] - a[2 * b.n + 1];
  return s + std::complex<R>(R(0), R(net) * Omega);
}

template <class R>
ResonanceSet resonance_set(const MultiIndex& a, const MasterBasisT<R>& b, R Omega, Style style, double eta) {
  using std::abs;
  if (!(eta > 0)) throw std::invalid_argument("resonance tolerance must be positive");
  const int n = b.n;
  ResonanceSet rs;
  rs.alpha = a;
  const std::complex<R> s = sigma(a, b, Omega);
  rs.sigma = to_cd(s);
  std::vector<int> net(n);
  for (int j = 0; j < n; ++j) net[j] = a[j] - a[j + n];
  const int net_omega = a[2 * n] - a[2 * n + 1];
  for (int r = 0; r < 2 * n; ++r) {
    if (style == Style::graph) {
      rs.members.push_back(r);
      rs.reasons.push_back(Reason::graph_forced);
      continue;
    }
    bool trivial = net_omega == 0;
    for (int j = 0; j < n && trivial; ++j) {
      const int want = (r < n ? (j == r ? 1 : 0) : (j == r - n ? -1 : 0));
      trivial = net[j] == want;
    }
    const R li = b.lambda[r].imag();
    const bool near = abs(s.imag() - li) <= R(eta) * abs(li);
    if (trivial || near) {
      rs.members.push_back(r);
      rs.reasons.push_back(trivial ? Reason::exact_trivial : Reason::near_resonant);
    }
  }
  if (style == Style::rnf) {
    const auto base = rs.members;
    for (int r : base) {
      const int q = b.partner(r);
      if (std::find(rs.members.begin(), rs.members.end(), q) == rs.members.end()) {
        rs.members.push_back(q);
        rs.reasons.push_back(Reason::near_resonant);
      }
    }
    std::vector<std::pair<int, Reason>> z;
    for (std::size_t i = 0; i < rs.members.size(); ++i) z.emplace_back(rs.members[i], rs.reasons[i]);
    std::sort(z.begin(), z.end(), [](auto& x, auto& y) { return x.first < y.first; });
    rs.members.clear();
    rs.reasons.clear();
    for (auto& [r, why] : z) {
      rs.members.push_back(r);
      rs.reasons.push_back(why);
    }
  }
  for (int r : rs.members) {
    const R lr = abs(b.lambda[r]);
    if (abs(s.real() - b.lambda[r].real()) > R(eta) * lr) rs.real_part_flag = true;
  }
  return rs;
}

template <class R>
void assemble_rhs(const ParametrisationT<R>& P, const MultiIndex& a, VecC<R>& nu, VecC<R>& mu) {
  using C = std::complex<R>;
  const MechModel& m = P.model;
  const int N = m.N;
  const int n2 = 2 * P.basis.n;
  const int p = order(a);
  nu = VecC<R>::Zero(N);
  mu = VecC<R>::Zero(N);
  if (p == 1) {
    if (a[P.plus_var()] == 1) nu += P.Eplus;
    if (a[P.minus_var()] == 1) nu += P.Eminus;
    return;
  }
  // Quadratic and cubic products over all splittings of alpha.
  for_each_proper_subindex(a, [&](const MultiIndex& b1) {
    const auto* e1 = P.find(b1);
    if (!e1) return;
    MultiIndex rest(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) rest[i] = a[i] - b1[i];
    if (!m.G.empty()) {
      if (const auto* e2 = P.find(rest)) nu -= eval_G<C>(m, e1->Psi, e2->Psi);
    }
    if (!m.H.empty() && order(rest) >= 2) {
      for_each_proper_subindex(rest, [&](const MultiIndex& b2) {
        const auto* e2 = P.find(b2);
        if (!e2) return;
        MultiIndex b3(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) b3[i] = rest[i] - b2[i];
        if (const auto* e3 = P.find(b3)) nu -= eval_H<C>(m, e1->Psi, e2->Psi, e3->Psi);
      });
    }
  });
  // Known part of [grad W . f]_alpha.
  VecC<R> NP = VecC<R>::Zero(N), NU = VecC<R>::Zero(N);
  for (int s = 0; s < n2; ++s) {
    MultiIndex ap = a;
    ++ap[s];
    for_each_proper_subindex(ap, [&](const MultiIndex& g) {
      const int og = order(g);
      if (og < 2 || og > p - 1 || g[s] > a[s]) return;
      const auto* eg = P.find(g);
      if (!eg || eg->f[s] == C(0)) return;
      MultiIndex beta(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) beta[i] = ap[i] - g[i];
      const auto* eb = P.find(beta);
      if (!eb) return;
      const C c = R(beta[s]) * eg->f[s];
      NP += c * eb->Psi;
      NU += c * eb->Ups;
    });
    for (int j : {P.plus_var(), P.minus_var()}) {
      if (a[j] < 1) continue;
      const auto* ej = P.find(unit_index(P.n_vars(), j));
      if (!ej || ej->f[s] == C(0)) continue;
      MultiIndex beta = a;
      --beta[j];
      ++beta[s];
      const auto* eb = P.find(beta);
      if (!eb) continue;
      const C c = R(beta[s]) * ej->f[s];
      NP += c * eb->Psi;
      NU += c * eb->Ups;
    }
  }
  nu -= m.M.cast<C>() * NU;
  mu = -NP;
}

template <class R>
std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> BorderedCache<R>::get(const std::complex<R>& s,
                                                                     const std::vector<int>& Rs) {
  std::lock_guard<std::mutex> lk(mtx_);
  for (auto& it : items_)
    if (it.sigma == s && it.R_set == Rs) return it.lu;
  return nullptr;
}

template <class R>
void BorderedCache<R>::put(const std::complex<R>& s, const std::vector<int>& Rs,
                           std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> lu) {
  std::lock_guard<std::mutex> lk(mtx_);
  items_.push_back({s, Rs, std::move(lu)});
}

template <class R>
SolveResult<R> solve_orderp(const MechModel& m, const MasterBasisT<R>& b, const std::complex<R>& sg,
                            const std::vector<int>& Rs, const VecC<R>& nu, const VecC<R>& mu,
                            BorderedCache<R>* cache) {
  using C = std::complex<R>;
  using std::abs;
  const int N = m.N;
  const int k = static_cast<int>(Rs.size());
  const MatC<R> M = m.M.cast<C>(), Cm = m.C.cast<C>(), K = m.K.cast<C>();
  std::shared_ptr<Eigen::PartialPivLU<MatC<R>>> lu = cache ? cache->get(sg, Rs) : nullptr;
  if (!lu) {
    MatC<R> A = MatC<R>::Zero(N + k, N + k);
    A.topLeftCorner(N, N) = sg * sg * M + sg * Cm + K;
    for (int i = 0; i < k; ++i) {
      const int r = Rs[i];
      const MatC<R> Lr = (sg + b.lambda[r]) * M + Cm;
      A.block(0, N + i, N, 1) = Lr * b.YU.col(r);
      A.block(N + i, 0, 1, N) = b.XV.col(r).adjoint() * Lr;
      for (int j = 0; j < k; ++j) A(N + i, N + j) = (b.XV.col(r).adjoint() * M * b.YU.col(Rs[j]))(0, 0);
    }
    lu = std::make_shared<Eigen::PartialPivLU<MatC<R>>>(A);
    const R rc = lu->rcond();
    if (!(rc > singular_threshold<R>())) {
      std::ostringstream os;
      os << "bordered system is singular (rcond " << to_double(rc) << ") at sigma = " << to_cd(sg)
         << "; |Im sigma - Im lambda_r| =";
      for (int r = 0; r < 2 * b.n; ++r) os << ' ' << to_double(R(abs(sg.imag() - b.lambda[r].imag())));
      throw std::runtime_error(os.str());
    }
    if (cache) cache->put(sg, Rs, lu);
  }
  VecC<R> rhs(N + k);
  rhs.head(N) = nu + (sg * M + Cm) * mu;
  for (int i = 0; i < k; ++i) rhs[N + i] = (b.XV.col(Rs[i]).adjoint() * M * mu)(0, 0);
  const VecC<R> x = lu->solve(rhs);
  SolveResult<R> out;
  out.Psi = x.head(N);
  out.f = VecC<R>::Zero(2 * b.n);
  for (int i = 0; i < k; ++i) out.f[Rs[i]] = x[N + i];
  out.Ups = sg * out.Psi - mu;
  for (int i = 0; i < k; ++i) out.Ups += out.f[Rs[i]] * b.YU.col(Rs[i]);
  return out;
}

SolveResult<double> modal_oracle_solve(const MechModel& m, const MasterBasis& b, const FullSpectrum& s, cd sg,
                                       const std::vector<int>& Rs, const Eigen::VectorXcd& nu,
                                       const Eigen::VectorXcd& mu) {
  const int N = m.N;
  if (s.lambda.size() != 2 * N) throw std::invalid_argument("modal oracle: spectrum size mismatch");
  // Full-spectrum column of each master column.
  std::vector<int> full_of(2 * b.n);
  for (int j = 0; j < b.n; ++j) {
    full_of[j] = b.modes[j];
    full_of[j + b.n] = b.modes[j] + N;
  }
  Eigen::VectorXcd Rv(2 * N);
  Rv << nu, m.M.cast<cd>() * mu;
  const Eigen::VectorXcd S = s.X.adjoint() * Rv;
  Eigen::VectorXcd xi = Eigen::VectorXcd::Zero(2 * N);
  SolveResult<double> out;
  out.f = Eigen::VectorXcd::Zero(2 * b.n);
  const double scale = s.lambda.cwiseAbs().maxCoeff();
  for (int q = 0; q < 2 * N; ++q) {
    int master_col = -1;
    for (int r : Rs)
      if (full_of[r] == q) master_col = r;
    if (master_col >= 0) {
      out.f[master_col] = S[q];
      continue;
    }
    const cd d = sg - s.lambda[q];
    if (std::abs(d) < 1e-10 * scale)
      throw std::runtime_error("modal oracle: undeclared cross-resonance with eigenvalue " + std::to_string(q));
    xi[q] = S[q] / d;
  }
  const Eigen::VectorXcd W = s.Y * xi;
  out.Ups = W.head(N);
  out.Psi = W.tail(N);
  return out;
}

SolveResult<double> cnf_single_master_solve(const MechModel& m, const MasterBasis& b, cd sg,
                                            const std::vector<int>& Rs, const Eigen::VectorXcd& nu,
                                            const Eigen::VectorXcd& mu) {
  if (b.n != 1 || !b.real_mode || Rs.size() > 1)
    throw std::invalid_argument("fast path needs one real-mode master and at most one resonance");
  const int N = m.N;
  const Eigen::MatrixXcd M = m.M.cast<cd>(), C = m.C.cast<cd>(), K = m.K.cast<cd>();
  const Eigen::MatrixXcd L = sg * sg * M + sg * C + K;
  const Eigen::VectorXcd Xi = nu + (sg * M + C) * mu;
  SolveResult<double> out;
  out.f = Eigen::VectorXcd::Zero(2);
  if (Rs.empty()) {
    out.Psi = L.partialPivLu().solve(Xi);
    out.Ups = sg * out.Psi - mu;
    return out;
  }
  const int r = Rs[0];
  const Eigen::VectorXcd phi = b.YU.col(r);
  const Eigen::VectorXcd Mphi = M * phi;
  const cd border = sg - std::conj(b.lambda[r]);
  Eigen::MatrixXcd A(N + 1, N + 1);
  A.topLeftCorner(N, N) = L;
  A.block(0, N, N, 1) = border * Mphi;
  A.block(N, 0, 1, N) = border * Mphi.transpose();
  A(N, N) = 1.0;
  Eigen::VectorXcd rhs(N + 1);
  rhs << Xi, Mphi.dot(mu);
  const Eigen::VectorXcd x = A.partialPivLu().solve(rhs);
  out.Psi = x.head(N);
  out.f[r] = x[N];
  out.Ups = sg * out.Psi + out.f[r] * phi - mu;
  return out;
}

template <class R>
ParametrisationT<R> compute_parametrisation(const MechModel& m, const MasterBasisT<R>& b, const ParamOptions& opt,
                                            const ParametrisationT<R>* reuse) {
  using C = std::complex<R>;
  using clock = std::chrono::steady_clock;
  using std::abs;
  opt.rule.validate();
  if (!(opt.eta > 0)) throw std::invalid_argument("resonance tolerance must be positive");
  if (b.N != m.N) throw std::invalid_argument("basis and model sizes differ");
  if constexpr (!std::is_same_v<R, double>) {
    if (opt.solver != SolverKind::bordered) throw std::invalid_argument("only the bordered solver runs in extended precision");
  }
  if (opt.solver == SolverKind::modal_oracle && !opt.spectrum)
    throw std::invalid_argument("modal oracle solver needs the full spectrum");
  if (opt.solver == SolverKind::cnf_fast && (b.n != 1 || !b.real_mode || opt.style != Style::cnf))
    throw std::invalid_argument("fast path needs one real-mode master and CNF style");

  ParametrisationT<R> P;
  P.style = opt.style;
  P.rule = opt.rule;
  P.eta = opt.eta;
  P.Omega = R(opt.Omega);
  P.model = m;
  P.basis = b;
  const VecC<R> F = forcing_shape(m).cast<R>().template cast<C>();
  P.Eplus = F / R(2);
  P.Eminus = F / R(2);
  const int nv = P.n_vars();
  const int n2 = 2 * b.n;
  BorderedCache<R> cache;

  auto insert = [&](EntryT<R>&& e) {
    P.index.emplace(e.alpha, static_cast<int>(P.entries.size()));
    P.entries.push_back(std::move(e));
  };

  auto solve_one = [&](const MultiIndex& a, EntryT<R>& e, ResonanceSet& rs) {
    e.alpha = a;
    e.p = order(a);
    e.pf = forcing_order(a);
    assemble_rhs(P, a, e.nu, e.mu);
    e.sigma = sigma(a, b, P.Omega);
    rs = resonance_set(a, b, P.Omega, opt.style, opt.eta);
    e.R_set = rs.members;
    SolveResult<R> sr;
    if constexpr (std::is_same_v<R, double>) {
      if (opt.solver == SolverKind::modal_oracle)
        sr = modal_oracle_solve(m, b, *opt.spectrum, e.sigma, e.R_set, e.nu, e.mu);
      else if (opt.solver == SolverKind::cnf_fast)
        sr = cnf_single_master_solve(m, b, e.sigma, e.R_set, e.nu, e.mu);
      else
        sr = solve_orderp(m, b, e.sigma, e.R_set, e.nu, e.mu, &cache);
    } else {
      sr = solve_orderp(m, b, e.sigma, e.R_set, e.nu, e.mu, &cache);
    }
    e.Psi = std::move(sr.Psi);
    e.Ups = std::move(sr.Ups);
    e.f = std::move(sr.f);
  };

  const MatC<R> Mc = m.M.cast<C>();
  auto projection_error = [&](const EntryT<R>& e) {
    R worst(0);
    for (int r : e.R_set) {
      const C proj = (b.XV.col(r).adjoint() * e.nu)(0, 0) + (b.XU.col(r).adjoint() * (Mc * e.mu))(0, 0);
      const R scale = b.XV.col(r).norm() * e.nu.norm() + b.XU.col(r).norm() * (Mc * e.mu).norm();
      if (scale > R(0)) worst = std::max(worst, R(abs(e.f[r] - proj) / scale));
    }
    return to_double(worst);
  };

  // Order 1: tangency for the masters, forcing columns solved.
  auto t0 = clock::now();
  int count1 = 0;
  for (int s = 0; s < n2; ++s) {
    EntryT<R> e;
    e.alpha = unit_index(nv, s);
    e.p = 1;
    e.sigma = b.lambda[s];
    e.R_set = {s};
    e.Psi = b.YU.col(s);
    e.Ups = b.YV.col(s);
    e.f = VecC<R>::Zero(n2);
    e.f[s] = b.lambda[s];
    e.nu = VecC<R>::Zero(m.N);
    e.mu = VecC<R>::Zero(m.N);
    insert(std::move(e));
    ++count1;
  }
  for (int j : {P.plus_var(), P.minus_var()}) {
    MultiIndex a = unit_index(nv, j);
    if (!truncation_keep(a, opt.rule)) continue;
    EntryT<R> e;
    ResonanceSet rs;
    solve_one(a, e, rs);
    P.max_projection_error = std::max(P.max_projection_error, projection_error(e));
    P.log.push_back(rs);
    insert(std::move(e));
    ++count1;
  }
  P.stats.push_back({1, count1, std::chrono::duration<double>(clock::now() - t0).count()});

  for (int p = 2; p <= opt.rule.max_order(); ++p) {
    t0 = clock::now();
    std::vector<MultiIndex> mons;
    for (auto& a : monomials_of_order(p, nv))
      if (truncation_keep(a, opt.rule)) mons.push_back(std::move(a));
    int done = 0;
    std::size_t start = 0;
    while (start < mons.size()) {
      const int stage = forcing_order(mons[start]);
      std::size_t stop = start;
      while (stop < mons.size() && forcing_order(mons[stop]) == stage) ++stop;
      const int cnt = static_cast<int>(stop - start);
      std::vector<EntryT<R>> out(cnt);
      std::vector<ResonanceSet> logs(cnt);
      std::vector<char> fresh(cnt, 1);
      parallel_for(cnt, opt.threads, [&](int i) {
        const MultiIndex& a = mons[start + i];
        if (reuse && stage == 0) {
          if (const auto* old = reuse->find(a)) {
            out[i] = *old;
            fresh[i] = 0;
            return;
          }
        }
        solve_one(a, out[i], logs[i]);
      });
      for (int i = 0; i < cnt; ++i) {
        if (fresh[i]) {
          P.max_projection_error = std::max(P.max_projection_error, projection_error(out[i]));
          if (!logs[i].members.empty() || opt.style == Style::graph) P.log.push_back(logs[i]);
        }
        insert(std::move(out[i]));
      }
      done += cnt;
      start = stop;
    }
    P.stats.push_back({p, done, std::chrono::duration<double>(clock::now() - t0).count()});
  }
  if (reuse) {
    // Keep resonance entries of reused autonomous monomials.
    for (const auto& rs : reuse->log)
      if (forcing_order(rs.alpha) == 0) P.log.push_back(rs);
  }
  const double tol = 1e-6;
  if (P.max_projection_error > tol)
    throw std::runtime_error("reduced dynamics coefficient disagrees with its projection formula (rel. error " +
                             std::to_string(P.max_projection_error) + ")");
  return P;
}

template <class R>
VecC<R> full_coordinates(const ParametrisationT<R>& P, const VecC<R>& z, R phase, R eps) {
  using std::cos;
  using std::sin;
  using C = std::complex<R>;
  const int n2 = 2 * P.basis.n;
  if (z.size() != n2) throw std::invalid_argument("full_coordinates: expected 2n master coordinates");
  VecC<R> zf(n2 + 2);
  zf.head(n2) = z;
  zf[n2] = eps * C(cos(phase), sin(phase));
  zf[n2 + 1] = eps * C(cos(phase), -sin(phase));
  return zf;
}

template <class R>
std::vector<R> invariance_residual(const ParametrisationT<R>& P, const std::vector<ResidualSample<R>>& samples) {
  using C = std::complex<R>;
  const MechModel& m = P.model;
  const int N = m.N;
  const int nv = P.n_vars();
  const int n2 = 2 * P.basis.n;
  const MatC<R> M = m.M.cast<C>(), Cm = m.C.cast<C>(), K = m.K.cast<C>();
  int top = 1;
  for (const auto& e : P.entries) top = std::max(top, e.p);
  std::vector<R> out;
  for (const auto& smp : samples) {
    const VecC<R> zf = full_coordinates(P, smp.z, smp.phase, smp.eps);
    std::vector<std::vector<C>> pw(nv, std::vector<C>(top + 1));
    for (int v = 0; v < nv; ++v) {
      pw[v][0] = C(1);
      for (int e = 1; e <= top; ++e) pw[v][e] = pw[v][e - 1] * zf[v];
    }
    VecC<R> Psi = VecC<R>::Zero(N), Ups = VecC<R>::Zero(N), f = VecC<R>::Zero(n2);
    for (const auto& e : P.entries) {
      C mono(1);
      for (int v = 0; v < nv; ++v) mono *= pw[v][e.alpha[v]];
      Psi += mono * e.Psi;
      Ups += mono * e.Ups;
      f += mono * e.f;
    }
    VecC<R> ff(nv);
    ff.head(n2) = f;
    ff[n2] = C(R(0), P.Omega) * zf[n2];
    ff[n2 + 1] = C(R(0), -P.Omega) * zf[n2 + 1];
    VecC<R> DPsi = VecC<R>::Zero(N), DUps = VecC<R>::Zero(N);
    for (const auto& e : P.entries) {
      C acc(0);
      for (int s = 0; s < nv; ++s) {
        if (e.alpha[s] == 0) continue;
        C d = R(e.alpha[s]) * pw[s][e.alpha[s] - 1];
        for (int v = 0; v < nv; ++v)
          if (v != s) d *= pw[v][e.alpha[v]];
        acc += d * ff[s];
      }
      DPsi += acc * e.Psi;
      DUps += acc * e.Ups;
    }
    VecC<R> r1 = M * DUps + Cm * Ups + K * Psi - P.Eplus * zf[n2] - P.Eminus * zf[n2 + 1];
    if (!m.G.empty()) r1 += eval_G<C>(m, Psi, Psi);
    if (!m.H.empty()) r1 += eval_H<C>(m, Psi, Psi, Psi);
    const VecC<R> r2 = M * (DPsi - Ups);
    using std::sqrt;
    out.push_back(sqrt(r1.squaredNorm() + r2.squaredNorm()));
  }
  return out;
}

void append_linear_forcing(Parametrisation& P) {
  const int nv = P.n_vars();
  const int n2 = 2 * P.basis.n;
  for (int j : {P.plus_var(), P.minus_var()}) {
    const MultiIndex a = unit_index(nv, j);
    if (P.find(a)) continue;
    EntryT<double> e;
    e.alpha = a;
    e.p = 1;
    e.pf = 1;
    e.sigma = cd(0, j == P.plus_var() ? P.Omega : -P.Omega);
    const Eigen::VectorXcd& E = j == P.plus_var() ? P.Eplus : P.Eminus;
    e.Psi = Eigen::VectorXcd::Zero(P.model.N);
    e.Ups = Eigen::VectorXcd::Zero(P.model.N);
    e.nu = E;
    e.mu = Eigen::VectorXcd::Zero(P.model.N);
    e.f = Eigen::VectorXcd::Zero(n2);
    for (int r = 0; r < n2; ++r) {
      e.f[r] = P.basis.XV.col(r).dot(E);
      e.R_set.push_back(r);
    }
    P.index.emplace(a, static_cast<int>(P.entries.size()));
    P.entries.push_back(std::move(e));
  }
}

std::string parametrisation_json(const Parametrisation& P) {
  using nlohmann::json;
  auto cvec = [](const Eigen::VectorXcd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      a.push_back(v[i].real());
      a.push_back(v[i].imag());
    }
    return a;
  };
  json j;
  j["schema_version"] = kSchemaVersion;
  j["style"] = to_string(P.style);
  j["truncation"] = {{"mode", to_string(P.rule.mode)}, {"o", P.rule.o}, {"o_eps", P.rule.o_eps}, {"m", P.rule.m}};
  j["Omega0"] = P.Omega;
  j["eta"] = P.eta;
  j["N"] = P.model.N;
  j["n_master"] = P.basis.n;
  json modes = json::array();
  for (int k : P.basis.modes) modes.push_back(k + 1);
  j["basis"] = {{"modes", modes},
                {"lambda", cvec(P.basis.lambda)},
                {"omega", std::vector<double>(P.basis.omega.data(), P.basis.omega.data() + P.basis.n)},
                {"xi", std::vector<double>(P.basis.xi.data(), P.basis.xi.data() + P.basis.n)}};
  json mons = json::array();
  for (const auto& e : P.entries) {
    json me;
    me["exponents"] = e.alpha;
    me["order"] = e.p;
    me["forcing_order"] = e.pf;
    me["sigma"] = {e.sigma.real(), e.sigma.imag()};
    std::vector<int> rs;
    for (int r : e.R_set) rs.push_back(r + 1);
    me["resonant"] = rs;
    me["psi"] = cvec(e.Psi);
    me["upsilon"] = cvec(e.Ups);
    me["f"] = cvec(e.f);
    mons.push_back(me);
  }
  j["monomials"] = mons;
  return j.dump(1);
}

std::string resonance_log_text(const Parametrisation& P) {
  std::ostringstream os;
  os.precision(10);
  os << "# alpha sigma_re sigma_im members(reason) flag\n";
  for (const auto& rs : P.log) {
    os << to_string(rs.alpha) << ' ' << rs.sigma.real() << ' ' << rs.sigma.imag() << ' ';
    if (rs.members.empty()) os << '-';
    for (std::size_t i = 0; i < rs.members.size(); ++i)
      os << (i ? "," : "") << rs.members[i] + 1 << '(' << to_string(rs.reasons[i]) << ')';
    if (rs.real_part_flag) os << " real-part-mismatch";
    os << '\n';
  }
  return os.str();
}

#define DPIM_INSTANTIATE(R)                                                                                      \
  template std::complex<R> sigma<R>(const MultiIndex&, const MasterBasisT<R>&, R);                              \
  template ResonanceSet resonance_set<R>(const MultiIndex&, const MasterBasisT<R>&, R, Style, double);          \
  template void assemble_rhs<R>(const ParametrisationT<R>&, const MultiIndex&, VecC<R>&, VecC<R>&);             \
  template class BorderedCache<R>;                                                                              \
  template SolveResult<R> solve_orderp<R>(const MechModel&, const MasterBasisT<R>&, const std::complex<R>&,    \
                                          const std::vector<int>&, const VecC<R>&, const VecC<R>&,              \
                                          BorderedCache<R>*);                                                   \
  template ParametrisationT<R> compute_parametrisation<R>(const MechModel&, const MasterBasisT<R>&,            \
                                                          const ParamOptions&, const ParametrisationT<R>*);     \
  template VecC<R> full_coordinates<R>(const ParametrisationT<R>&, const VecC<R>&, R, R);                      \
  template std::vector<R> invariance_residual<R>(const ParametrisationT<R>&,                                    \
                                                 const std::vector<ResidualSample<R>>&);

DPIM_INSTANTIATE(double)
DPIM_INSTANTIATE(quad)

}  // namespace dpim
