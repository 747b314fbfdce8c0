#include "dpim/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace dpim {

namespace {

double to_num(const std::string& s, const std::string& key) {
  std::size_t used = 0;
  double v;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error(key + ": expected a number, got '" + s + "'");
  }
  if (used != s.size()) throw std::runtime_error(key + ": expected a number, got '" + s + "'");
  return v;
}

int to_int(const std::string& s, const std::string& key) {
  const double v = to_num(s, key);
  if (v != static_cast<int>(v)) throw std::runtime_error(key + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

bool to_bool(const std::string& s, const std::string& key) {
  const std::string l = boost::algorithm::to_lower_copy(s);
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  throw std::runtime_error(key + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, s, boost::algorithm::is_any_of(","));
  for (auto& p : parts) boost::algorithm::trim(p);
  parts.erase(std::remove(parts.begin(), parts.end(), ""), parts.end());
  return parts;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(15);
  os << v;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

struct Key {
  std::string section, name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define DPIM_NUM(sec, key, field)                                                       \
  Key {                                                                                 \
    sec, key, [](const RunConfig& c) { return fmt(c.field); },                          \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.field = to_num(v, k); } \
  }
#define DPIM_INT(sec, key, field)                                                                \
  Key {                                                                                          \
    sec, key, [](const RunConfig& c) { return std::to_string(c.field); },                        \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.field = to_int(v, k); } \
  }
#define DPIM_BOOL(sec, key, field)                                                                \
  Key {                                                                                           \
    sec, key, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); },         \
        [](RunConfig& c, const std::string& v, const std::string& k) { c.field = to_bool(v, k); } \
  }
#define DPIM_STR(sec, key, field)                                                     \
  Key {                                                                               \
    sec, key, [](const RunConfig& c) { return c.field; },                             \
        [](RunConfig& c, const std::string& v, const std::string&) { c.field = v; }   \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      DPIM_STR("model", "source", source),
      DPIM_STR("model", "path", path),
      DPIM_NUM("model", "omega0", omega0),
      DPIM_NUM("model", "xi", xi),
      DPIM_NUM("model", "g", g),
      DPIM_NUM("model", "h", h),
      DPIM_INT("model", "n_modes", n_modes),
      DPIM_NUM("model", "length", length),
      DPIM_NUM("model", "thickness", thickness),
      DPIM_NUM("model", "width", width),
      DPIM_NUM("model", "youngs", youngs),
      DPIM_NUM("model", "density", density),
      DPIM_STR("model", "bc", bc),
      DPIM_NUM("damping", "rayleigh_alpha", rayleigh_alpha),
      DPIM_NUM("damping", "rayleigh_beta", rayleigh_beta),
      DPIM_NUM("damping", "alpha_omega1_divisor", alpha_omega1_divisor),
      Key{"masters", "modes", [](const RunConfig& c) { return join(c.masters); },
          [](RunConfig& c, const std::string& v, const std::string& k) {
            c.masters.clear();
            for (const auto& p : split_list(v)) c.masters.push_back(to_int(p, k));
          }},
      DPIM_STR("parametrisation", "style", style),
      DPIM_STR("parametrisation", "truncation", truncation),
      DPIM_INT("parametrisation", "order", order),
      DPIM_INT("parametrisation", "eps_order", eps_order),
      DPIM_INT("parametrisation", "m", m),
      DPIM_NUM("parametrisation", "eta", eta),
      DPIM_NUM("parametrisation", "expansion_omega", expansion_omega),
      DPIM_STR("parametrisation", "solver", solver),
      DPIM_INT("parametrisation", "threads", threads),
      DPIM_NUM("forcing", "window_lo", window_lo),
      DPIM_NUM("forcing", "window_hi", window_hi),
      DPIM_BOOL("forcing", "window_relative", window_relative),
      Key{"forcing", "eps", [](const RunConfig& c) { return join(c.eps); },
          [](RunConfig& c, const std::string& v, const std::string& k) {
            c.eps.clear();
            for (const auto& p : split_list(v)) c.eps.push_back(to_num(p, k));
          }},
      DPIM_BOOL("forcing", "reparametrise_per_point", reparametrise_per_point),
      DPIM_INT("continuation", "harmonics", hb.H),
      DPIM_INT("continuation", "n_fourier", hb.n_fourier),
      DPIM_NUM("continuation", "ds", hb.ds),
      DPIM_NUM("continuation", "ds_min", hb.ds_min),
      DPIM_NUM("continuation", "ds_max", hb.ds_max),
      DPIM_INT("continuation", "max_points", hb.max_points),
      DPIM_NUM("continuation", "tol", hb.tol),
      DPIM_INT("continuation", "max_newton", hb.max_newton),
      DPIM_BOOL("continuation", "stability", hb.stability),
      DPIM_BOOL("oracle", "hbm", hbm),
      DPIM_BOOL("oracle", "time_integration", time_integration),
      DPIM_INT("oracle", "ti_points", ti_points),
      DPIM_BOOL("whisker", "enabled", whisker),
      DPIM_INT("whisker", "phases", phases),
      DPIM_NUM("whisker", "radius", whisker_radius),
      DPIM_INT("whisker", "grid", whisker_grid),
      DPIM_STR("whisker", "slave", slave_kind),
      DPIM_INT("whisker", "slave_index", slave_index),
      DPIM_STR("output", "directory", directory),
  };
  return keys;
}

}  // namespace

TruncationRule RunConfig::rule() const {
  TruncationRule r;
  r.mode = parse_trunc_mode(truncation);
  r.o = order;
  r.o_eps = eps_order;
  r.m = m;
  return r;
}

void RunConfig::validate() const {
  if (source != "duffing" && source != "beam" && source != "file")
    throw std::runtime_error("model.source must be duffing, beam or file");
  if (source == "file" && path.empty()) throw std::runtime_error("model.path is required for file models");
  if (masters.empty()) throw std::runtime_error("masters.modes must list at least one mode");
  for (int k : masters)
    if (k < 1) throw std::runtime_error("masters.modes are 1-based");
  parse_style(style);
  rule().validate();
  if (!(eta > 0)) throw std::runtime_error("parametrisation.eta must be positive");
  if (solver != "bordered" && solver != "modal" && solver != "cnf_fast")
    throw std::runtime_error("parametrisation.solver must be bordered, modal or cnf_fast");
  if (threads < 1) throw std::runtime_error("parametrisation.threads must be at least 1");
  if (!(window_hi > window_lo) || !(window_lo > 0)) throw std::runtime_error("forcing window must satisfy 0 < lo < hi");
  if (eps.empty()) throw std::runtime_error("forcing.eps must list at least one value");
  for (double e : eps)
    if (e < 0) throw std::runtime_error("forcing.eps values must be non-negative");
  hb.validate();
  if (phases < 1) throw std::runtime_error("whisker.phases must be positive");
  if (whisker_grid < 2) throw std::runtime_error("whisker.grid must be at least 2");
  if (slave_kind != "dof" && slave_kind != "mode") throw std::runtime_error("whisker.slave must be dof or mode");
  if (slave_index < 1) throw std::runtime_error("whisker.slave_index is 1-based");
}

RunConfig parse_config(const std::string& text, const std::string& name) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::runtime_error(name + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw std::runtime_error(name + ": key '" + section + "' outside of a section");
    bool known_section = false;
    for (const auto& k : registry()) known_section |= k.section == section;
    if (!known_section) throw std::runtime_error(name + ": unknown section [" + section + "]");
    for (const auto& [key, val] : body) {
      const Key* hit = nullptr;
      for (const auto& k : registry())
        if (k.section == section && k.name == key) hit = &k;
      if (!hit) throw std::runtime_error(name + ": unknown key '" + key + "' in [" + section + "]");
      hit->set(c, boost::algorithm::trim_copy(val.data()), section + "." + key);
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_text(const RunConfig& c) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : registry()) {
    if (k.section != section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.name << " = " << k.get(c) << '\n';
  }
  return os.str();
}

MechModel build_model(const RunConfig& c) {
  MechModel m;
  if (c.source == "duffing") m = builtin_duffing(c.omega0, c.xi, c.g, c.h);
  else if (c.source == "beam")
    m = builtin_vk_beam(c.n_modes, c.length, c.thickness, c.width, c.youngs, c.density, parse_bc(c.bc));
  else m = load_model(c.path);
  if (c.alpha_omega1_divisor > 0 || c.rayleigh_alpha != 0 || c.rayleigh_beta != 0) {
    double alpha = c.rayleigh_alpha;
    if (c.alpha_omega1_divisor > 0) alpha += undamped_modes(m).omega[0] / c.alpha_omega1_divisor;
    apply_rayleigh(m, alpha, c.rayleigh_beta);
  }
  for (int k : c.masters)
    if (k > m.N) throw std::runtime_error("master mode " + std::to_string(k) + " exceeds model size");
  m.validate();
  return m;
}

}  // namespace dpim
