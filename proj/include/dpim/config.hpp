#pragma once

#include <string>
#include <vector>

#include "dpim/model.hpp"
#include "dpim/parametrisation.hpp"
#include "dpim/periodic.hpp"

namespace dpim {

struct RunConfig {
  // [model]
  std::string source = "duffing";  // duffing | beam | file
  std::string path;
  double omega0 = 1.0, xi = 0.01, g = 0.0, h = 1.0;
  int n_modes = 10;
  double length = 1.0, thickness = 0.01, width = 0.01, youngs = 210e9, density = 7800;
  std::string bc = "cc";

  // [damping]
  double rayleigh_alpha = 0, rayleigh_beta = 0;
  double alpha_omega1_divisor = 0;  // alpha = omega_1 / divisor when positive

  // [masters], 1-based
  std::vector<int> masters{1};

  // [parametrisation]
  std::string style = "cnf";
  std::string truncation = "coupled";
  int order = 5, eps_order = 1, m = 1;
  double eta = 0.1;
  double expansion_omega = 0;  // 0 selects the first master frequency
  std::string solver = "bordered";
  int threads = 1;

  // [forcing]
  double window_lo = 0.9, window_hi = 1.1;
  bool window_relative = true;  // window in units of the first master frequency
  std::vector<double> eps{0.01};
  bool reparametrise_per_point = false;

  // [continuation]
  HBConfig hb;

  // [oracle]
  bool hbm = false;
  bool time_integration = false;
  int ti_points = 5;

  // [whisker]
  bool whisker = false;
  int phases = 6;
  double whisker_radius = 0.1;
  int whisker_grid = 21;
  std::string slave_kind = "dof";  // dof | mode
  int slave_index = 1;

  // [output]
  std::string directory = "dpim_out";

  TruncationRule rule() const;
  void validate() const;
};

RunConfig parse_config(const std::string& text, const std::string& name = "<config>");
RunConfig load_config(const std::string& path);
// Every key with its current value, in the config grammar.
std::string config_text(const RunConfig& c);

MechModel build_model(const RunConfig& c);

}  // namespace dpim
