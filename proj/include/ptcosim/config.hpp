#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ptc {

// a*x^2 + b*x + c
struct Quadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;

  double operator()(double x) const { return (a * x + b) * x + c; }
  double derivative(double x) const { return 2.0 * a * x + b; }
};

struct SiteSpec {
  int cds_id = 0;
  int pds_bus = 0;
  int uts_node = 0;
};

// Every tunable of a co-simulation run. Keys in the key/value document are the
// member names below (quadratics are split into `<name>_a`, `<name>_b`, `<name>_c`).
struct ScenarioConfig {
  // time axis
  double interval_minutes = 15.0;
  int horizon = 1;
  int start_interval = 0;
  double sub_interval_minutes = 1.0;

  // parking rule thresholds
  double price_energy = 45.0;    // $/MWh
  double congestion_fee = 2.0;   // $/h
  double park_ratio_high = 0.8;  // share parked when price >= energy + congestion fee
  double park_ratio_mid = 0.3;   // share parked when energy <= price < energy + congestion fee
  double cds_capacity = 100.0;   // vehicles per station per interval
  double avg_rate = 0.005;       // MW per vehicle

  // market cost model
  Quadratic f_ps{0.15, 20.0, 0.0};
  Quadratic f_uts{1.5e-6, 0.027, 0.0};
  Quadratic f_wt{1.0e-4, 1.01, 0.0};
  double gamma1 = 1.0;
  double gamma1_max = 10.0;
  double tau1_hours = 0.25;
  double gamma2 = 0.05;
  double price_min = 0.0;
  double price_max = 1000.0;
  double cds_p_min = -1.0;  // MW per station
  double cds_p_max = 1.0;   // MW per station

  // OPF
  double alpha1 = 1.0;
  double beta1 = 0.0;
  double rho = 30.0;

  // tolerances and iteration caps
  double eps_traffic = 1e-4;
  double eps_admm = 1e-5;
  double eps_eq = 1e-6;
  double golden_tol = 1e-6;
  int max_iter_traffic = 500;
  int max_iter_admm = 5000;
  int max_iter_eq = 10000;

  // EV fleet
  double soc_min = 0.2;
  double soc_max = 0.95;
  double tau2_minutes = 15.0;  // parking time before a diverted vehicle re-enters
  double ev_rate_min = -0.01;  // MW (charging)
  double ev_rate_max = 0.01;   // MW (discharging)
  double ev_battery_mwh = 0.06;
  double ev_soc0_min = 0.4;
  double ev_soc0_max = 0.9;

  // network scaling
  double base_mva = 100.0;
  double base_kv = 12.47;
  double capacity_scale = 1.0;

  // run control
  bool coordination = true;
  bool strict = false;
  bool trace = false;
  int threads = 1;
  std::uint64_t seed = 1;

  // inputs
  std::string traffic_net;
  std::string traffic_trips;
  std::string feeder;
  std::vector<double> load_profile;    // MW per interval
  std::vector<double> demand_profile;  // OD multiplier per interval
  std::vector<SiteSpec> sites;

  // directory relative input paths resolve against
  std::filesystem::path base_dir;

  // Sets one key from its textual value; unknown keys and malformed values throw.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  // Checks field invariants; throws ErrorKind::Validation naming the violated one.
  void validate() const;

  std::filesystem::path resolve(const std::string& path) const;
  int sub_intervals_per_interval() const;
};

ScenarioConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
std::string to_text(const ScenarioConfig& cfg);

}  // namespace ptc
