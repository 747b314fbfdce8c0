#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dpim/config.hpp"
#include "dpim/oracle.hpp"
#include "dpim/rom.hpp"

namespace fs = std::filesystem;
using namespace dpim;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

enum ExitCode { ok = 0, usage = 1, config = 2, model = 3, spectral = 4, param = 5, rom = 6, oracle = 7, io = 8 };

struct StageError : std::runtime_error {
  int code;
  StageError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

template <class F>
auto stage(int code, const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(code, std::string(name) + ": " + e.what());
  }
}

struct Overrides {
  std::optional<std::string> style, truncation, output;
  std::optional<int> order, eps_order, threads;
  bool reparametrise = false;
};

std::string freq(double w) {
  std::ostringstream os;
  os.precision(8);
  os << w << " rad/t (" << w / kTwoPi << " cyc/t)";
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  stage(io, "output", [&] {
    std::ofstream o(p);
    if (!o) throw std::runtime_error("cannot write " + p.string());
    o << s;
    return 0;
  });
}

class Pipeline {
 public:
  Pipeline(const std::string& cfg_path, const Overrides& ov, bool report_spectrum)
      : report_spectrum_(report_spectrum) {
    cfg_ = stage(config, "config", [&] {
      RunConfig c = load_config(cfg_path);
      if (ov.style) c.style = *ov.style;
      if (ov.truncation) c.truncation = *ov.truncation;
      if (ov.order) c.order = *ov.order;
      if (ov.eps_order) c.eps_order = *ov.eps_order;
      if (ov.threads) c.threads = *ov.threads;
      if (ov.reparametrise) c.reparametrise_per_point = true;
      if (const char* env = std::getenv("DPIM_OUTPUT_DIR"); env && *env) c.directory = env;
      if (ov.output) c.directory = *ov.output;
      c.validate();
      return c;
    });
    out_ = cfg_.directory;
    stage(io, "output", [&] { return fs::create_directories(out_); });
  }

  void load_model() {
    model_ = stage(model, "model", [&] { return build_model(cfg_); });
    std::cout << "model " << model_.name << ": N = " << model_.N << ", " << model_.G.size() << " quadratic and "
              << model_.H.size() << " cubic coefficients\n";
  }

  void spectrum() {
    stage(spectral, "spectrum", [&] {
      std::vector<int> masters;
      for (int k : cfg_.masters) masters.push_back(k - 1);
      if (model_.N <= 500) dense_ = dense_spectrum(model_);
      try {
        basis_ = solve_real_mode_basis<double>(model_, masters);
      } catch (const std::exception& e) {
        if (!dense_) throw;
        std::cout << "real-mode path unavailable (" << e.what() << "), using the dense eigenproblem\n";
        basis_ = basis_from_spectrum(*dense_, model_.N, masters);
      }
      write_text(out_ / "spectrum.json", spectrum_json(model_, dense_ ? &*dense_ : nullptr, basis_));
      const auto modes = undamped_modes(model_);
      for (int r = 0; r < basis_.n; ++r)
        std::cout << "master " << basis_.modes[r] + 1 << ": omega = " << freq(basis_.omega[r])
                  << ", xi = " << basis_.xi[r] << '\n';
      if (report_spectrum_) {
        std::cout << "undamped frequencies:\n";
        for (int k = 0; k < model_.N; ++k) std::cout << "  " << k + 1 << "  " << freq(modes.omega[k]) << '\n';
        const auto id = eigen_identities(model_, basis_);
        std::cout << "eigen identities: right " << id.right << ", velocity " << id.velocity << ", left "
                  << id.left << ", left link " << id.left_link << ", biorthogonality " << id.biorth << '\n';
      }
      omega_ref_ = basis_.omega[0];
      lo_ = cfg_.window_relative ? cfg_.window_lo * omega_ref_ : cfg_.window_lo;
      hi_ = cfg_.window_relative ? cfg_.window_hi * omega_ref_ : cfg_.window_hi;
      std::cout << "window: " << freq(lo_) << " to " << freq(hi_) << '\n';
      const Eigen::VectorXd F = forcing_shape(model_);
      const double kappa = std::abs(modes.phi.col(basis_.modes[0]).dot(F));
      for (double e : cfg_.eps) {
        if (e > 0 && kappa > 0)
          std::cout << "eps = " << e << ": eps_load = "
                    << epsilon_load(e * kappa, model_.phi_max > 0 ? model_.phi_max
                                                                  : modes.phi.col(basis_.modes[0]).cwiseAbs().maxCoeff(),
                                    model_.L_CH, basis_.omega[0])
                    << '\n';
      }
      return 0;
    });
  }

  void parametrise() {
    stage(param, "parametrisation", [&] {
      ParamOptions opt;
      opt.style = parse_style(cfg_.style);
      opt.rule = cfg_.rule();
      opt.eta = cfg_.eta;
      opt.Omega = cfg_.expansion_omega > 0 ? cfg_.expansion_omega : omega_ref_;
      opt.threads = cfg_.threads;
      if (cfg_.solver == "modal") {
        if (!dense_) throw std::runtime_error("modal solver needs the dense spectrum");
        opt.solver = SolverKind::modal_oracle;
        opt.spectrum = &*dense_;
      } else if (cfg_.solver == "cnf_fast") {
        opt.solver = SolverKind::cnf_fast;
      }
      std::cout << "expansion frequency: " << freq(opt.Omega) << '\n';
      P_ = compute_parametrisation<double>(model_, basis_, opt);
      if (opt.rule.o_eps == 0) {
        append_linear_forcing(*P_);
        std::cout << "eps order 0: forcing enters through the undeformed manifold only\n";
      }
      std::cout << "parametrisation: " << P_->entries.size() << " monomials, " << P_->log.size()
                << " logged resonance sets, projection check " << P_->max_projection_error << '\n';
      write_text(out_ / "parametrisation.json", parametrisation_json(*P_));
      write_text(out_ / "resonance_log.txt", resonance_log_text(*P_));
      superharmonic_warning();
      return 0;
    });
  }

  void rom_frc() {
    stage(rom, "rom", [&] {
      RomFrcOptions ro;
      ro.hb = cfg_.hb;
      ro.reparametrise_per_point = cfg_.reparametrise_per_point;
      ro.threads = cfg_.threads;
      for (std::size_t i = 0; i < cfg_.eps.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const FRCBranch br = continue_frc(*P_, lo_, hi_, cfg_.eps[i], ro);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto [a, w] = br.peak();
        std::cout << "ROM FRC eps = " << cfg_.eps[i] << ": " << br.points.size() << " points, peak " << a
                  << " at " << freq(w) << ", " << br.fold_count() << " folds, " << dt << " s\n";
        write_frc(br, "frc_rom_eps" + std::to_string(i + 1) + ".csv");
        frc_lines_.push_back("rom eps=" + fmt(cfg_.eps[i]) + " peak=" + fmt(a) + " omega=" + fmt(w) +
                             " folds=" + std::to_string(br.fold_count()));
      }
      return 0;
    });
  }

  void oracles(bool force) {
    stage(oracle, "oracle", [&] {
      const bool do_hbm = force || cfg_.hbm;
      const bool do_ti = cfg_.time_integration;
      for (std::size_t i = 0; i < cfg_.eps.size(); ++i) {
        if (do_hbm) {
          FullOracleOptions fo;
          fo.hb = cfg_.hb;
          fo.hb.stability = false;
          fo.observe_mode = basis_.modes[0];
          const FRCBranch br = hbm_full(model_, lo_, hi_, cfg_.eps[i], fo);
          const auto [a, w] = br.peak();
          std::cout << "full HB eps = " << cfg_.eps[i] << ": " << br.points.size() << " points, peak " << a
                    << " at " << freq(w) << '\n';
          write_frc(br, "frc_hbm_eps" + std::to_string(i + 1) + ".csv");
          frc_lines_.push_back("hbm eps=" + fmt(cfg_.eps[i]) + " peak=" + fmt(a) + " omega=" + fmt(w));
        }
        if (do_ti) {
          std::ostringstream os;
          os.precision(15);
          os << "omega,amplitude,settled\n";
          TimeIntegrationOptions to;
          to.observe_mode = basis_.modes[0];
          for (int k = 0; k < cfg_.ti_points; ++k) {
            const double w = cfg_.ti_points == 1 ? 0.5 * (lo_ + hi_) : lo_ + (hi_ - lo_) * k / (cfg_.ti_points - 1);
            const SteadyState s = time_integrate_full(model_, w, cfg_.eps[i], to);
            if (!s.settled) std::cout << "warning: transient not settled at omega = " << w << '\n';
            os << w << ',' << s.amplitude << ',' << (s.settled ? 1 : 0) << '\n';
          }
          write_text(out_ / ("ti_eps" + std::to_string(i + 1) + ".csv"), os.str());
        }
      }
      return 0;
    });
  }

  void whiskers() {
    stage(rom, "whisker", [&] {
      WhiskerSpec ws;
      ws.radius = cfg_.whisker_radius;
      ws.n_grid = cfg_.whisker_grid;
      ws.modal = cfg_.slave_kind == "mode";
      ws.index = cfg_.slave_index - 1;
      if (ws.index >= model_.N) throw std::runtime_error("whisker slave index exceeds model size");
      std::vector<WhiskerSample> all;
      bool warned = false;
      for (int k = 0; k < cfg_.phases; ++k) {
        const double phi = kTwoPi * k / cfg_.phases;
        const auto r = whisker_snapshot(*P_, phi, k, cfg_.eps.front(), ws);
        if (r.outside_validity && !warned) {
          std::cout << "warning: whisker grid radius " << ws.radius << " exceeds the estimated validity radius "
                    << r.validity_radius << '\n';
          warned = true;
        }
        all.insert(all.end(), r.samples.begin(), r.samples.end());
      }
      stage(io, "output", [&] {
        write_whisker_csv(all, (out_ / "whisker.csv").string());
        return 0;
      });
      std::cout << "whisker: " << cfg_.phases << " phases, " << all.size() << " samples\n";
      return 0;
    });
  }

  void summary() {
    std::ostringstream os;
    os << "schema_version " << kSchemaVersion << '\n';
    os << "model " << model_.name << " N " << model_.N << '\n';
    for (int r = 0; r < basis_.n; ++r)
      os << "master " << basis_.modes[r] + 1 << " omega " << freq(basis_.omega[r]) << " xi " << basis_.xi[r] << '\n';
    if (P_) {
      os << "style " << cfg_.style << " truncation " << cfg_.truncation << " o " << cfg_.order << " o_eps "
         << cfg_.eps_order << '\n';
      os << "# order monomials seconds\n";
      for (const auto& s : P_->stats) os << s.order << ' ' << s.monomials << ' ' << s.seconds << '\n';
      os << "# resonance log\n" << resonance_log_text(*P_);
    }
    for (const auto& l : frc_lines_) os << l << '\n';
    write_text(out_ / "summary.txt", os.str());
    std::cout << "outputs written to " << out_.string() << '\n';
  }

  const RunConfig& cfg() const { return cfg_; }

 private:
  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  }

  void write_frc(const FRCBranch& br, const std::string& name) {
    stage(io, "output", [&] {
      write_frc_csv(br, (out_ / name).string());
      return 0;
    });
  }

  void superharmonic_warning() {
    std::vector<int> ks;
    for (int r = 0; r < basis_.n; ++r)
      for (int k = 2; k <= 5; ++k) {
        const double w = basis_.omega[r] / k;
        if (w >= lo_ * (1 - cfg_.eta) && w <= hi_ * (1 + cfg_.eta)) ks.push_back(k);
      }
    if (ks.empty()) return;
    bool logged = false;
    for (const auto& rs : P_->log)
      if (forcing_order(rs.alpha) >= 2 && !rs.members.empty()) logged = true;
    if (!logged) {
      std::cout << "warning: the window covers a " << ks.front()
                << ":1 superharmonic resonance but no superharmonic resonant monomial was logged; check eta and "
                   "eps_order\n";
    }
  }

  RunConfig cfg_;
  fs::path out_;
  bool report_spectrum_ = false;
  MechModel model_;
  std::optional<FullSpectrum> dense_;
  MasterBasis basis_;
  std::optional<Parametrisation> P_;
  double omega_ref_ = 1, lo_ = 0, hi_ = 0;
  std::vector<std::string> frc_lines_;
};

void report_monomials(const TruncationRule& rule, int n) {
  std::cout << "truncation " << to_string(rule.mode) << " o = " << rule.o << " o_eps = " << rule.o_eps;
  if (rule.mode == TruncMode::asymptotic) std::cout << " m = " << rule.m;
  std::cout << ", " << n << " master mode(s)\n";
  std::cout << "p_bar p_tilde monomials\n";
  long long total = 0;
  const auto cells = kept_cells(rule);
  for (const auto& [pb, pt] : cells) {
    // master part over 2n coordinates, forcing part over z+ and z-
    const long long c = (pb == 0 ? 1 : monomial_count(pb, 2 * n - 1)) * (pt + 1);
    total += c;
    std::cout << pb << ' ' << pt << ' ' << c << '\n';
  }
  std::cout << "kept cells " << cells.size() << ", monomials " << total << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct parametrisation of forced invariant manifolds"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  bool version = false, print_defaults = false, report_mono = false, report_spec = false;
  Overrides ov;
  int masters_n = 1;
  app.add_flag("--version", version, "Print version and coefficient schema version");
  app.add_flag("--print-defaults", print_defaults, "Print every config key with its default value");
  app.add_flag("--report-monomials", report_mono, "Print the kept (p_bar, p_tilde) cells and monomial counts");
  app.add_flag("--report-spectrum", report_spec, "Print the undamped spectrum and eigen-identity residuals");
  app.add_option("--style", ov.style, "graph, cnf or rnf");
  app.add_option("--truncation", ov.truncation, "asymptotic, coupled or disjoint");
  app.add_option("--order", ov.order, "Maximum order o");
  app.add_option("--eps-order", ov.eps_order, "Maximum forcing order o_eps");
  app.add_option("--threads", ov.threads, "Worker threads per order");
  app.add_option("--masters", masters_n, "Master mode count for --report-monomials without a config");
  app.add_option("--output", ov.output, "Output directory");
  app.add_flag("--reparametrise-per-point", ov.reparametrise, "Recompute the forced coefficients at every frequency");

  std::string cfg_path;
  const char* names[] = {"run", "spectrum", "parametrise", "frc", "whisker", "oracle"};
  const char* help[] = {"Full pipeline", "Eigenstructure report", "Compute the parametrisation",
                        "ROM frequency response", "Whisker snapshots", "Full-order reference solutions"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 6; ++i) {
    auto* s = app.add_subcommand(names[i], help[i]);
    s->add_option("config", cfg_path, "Config file")->required();
    subs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  if (version) {
    std::cout << "dpim 1.0.0 (coefficient schema " << kSchemaVersion << ")\n";
    return ok;
  }
  if (print_defaults) {
    std::cout << config_text(RunConfig{});
    return ok;
  }
  if (report_mono && subs[0]->parsed() + subs[1]->parsed() + subs[2]->parsed() + subs[3]->parsed() +
                             subs[4]->parsed() + subs[5]->parsed() ==
                         0) {
    try {
      RunConfig c;
      if (ov.truncation) c.truncation = *ov.truncation;
      if (ov.order) c.order = *ov.order;
      if (ov.eps_order) c.eps_order = *ov.eps_order;
      c.rule().validate();
      report_monomials(c.rule(), masters_n);
      return ok;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return config;
    }
  }

  int which = -1;
  for (int i = 0; i < 6; ++i)
    if (subs[i]->parsed()) which = i;
  if (which < 0) {
    std::cout << app.help();
    return usage;
  }

  try {
    Pipeline pl(cfg_path, ov, report_spec);
    if (report_mono) report_monomials(pl.cfg().rule(), static_cast<int>(pl.cfg().masters.size()));
    pl.load_model();
    pl.spectrum();
    const std::string cmd = names[which];
    if (cmd == "run" || cmd == "parametrise" || cmd == "frc" || cmd == "whisker") pl.parametrise();
    if (cmd == "run" || cmd == "frc") pl.rom_frc();
    if (cmd == "run") pl.oracles(false);
    if (cmd == "oracle") pl.oracles(true);
    if (cmd == "whisker" || (cmd == "run" && pl.cfg().whisker)) pl.whiskers();
    pl.summary();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  }
  return ok;
}
