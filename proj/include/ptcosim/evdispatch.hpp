#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptcosim/config.hpp"

namespace ptc::evdispatch {

enum class Regime { HighPrice, MidPrice, NoPark };
const char* regime_name(Regime r);

struct ParkingParams {
  double price_energy = 45.0;     // $/MWh
  double congestion_fee = 2.0;    // $/h
  double ratio_high = 0.8;
  double ratio_mid = 0.3;
  double avg_rate = 0.005;        // MW per vehicle
  double capacity = 100.0;        // vehicles

  static ParkingParams from_config(const ScenarioConfig& cfg);
};

struct ParkingDecision {
  int cds_id = 0;
  double parked = 0.0;
  Regime regime = Regime::NoPark;
  double price = 0.0;
  double injection = 0.0;  // MW
  double inflow = 0.0;     // vehicles reaching the CDS node
};

ParkingDecision parked_evs(double price, double injection_mw, double inflow, const ParkingParams& p, int cds_id = 0);

struct Ev {
  double demand = 0.0;    // required sum of rates over the window, MW
  double soc0 = 0.5;
  double capacity = 0.06; // MWh
};

struct ScheduleLimits {
  double rate_lo = -1.0;  // MW, charging negative
  double rate_hi = 1.0;   // MW, discharging positive
  double soc_lo = 0.0;
  double soc_hi = 1.0;
  double dt = 1.0;        // hours per sub-interval
};

struct ChargingSchedule {
  std::vector<std::vector<double>> rates;  // [ev][sub-interval]
  std::vector<std::vector<double>> soc;    // [ev][0..T]
  std::vector<double> demand;              // per EV
  std::vector<double> netload;             // baseline minus total rate, per sub-interval
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;
};

// Sum of squared consecutive netload differences.
double flatness_objective(const std::vector<double>& netload);
std::vector<double> netload_after(const std::vector<double>& baseline, const std::vector<std::vector<double>>& rates);
std::vector<double> soc_trajectory(double soc0, double capacity, const std::vector<double>& rates, double dt);

// Feasible range of an EV's window total under the rate box and SOC corridor.
struct DemandRange {
  double lo = 0.0;
  double hi = 0.0;
  bool feasible = false;
};
DemandRange achievable_demand(const Ev& ev, const ScheduleLimits& lim, std::size_t periods);

// Euclidean projection of `z` onto one EV's feasible rate set.
std::vector<double> project_rates(const std::vector<double>& z, const Ev& ev, const ScheduleLimits& lim);

struct SolverOptions {
  int max_iter = 20000;
  double tol = 1e-8;  // netload move, relative to the largest baseline value
};

ChargingSchedule solve_smart_schedule(const std::vector<double>& baseline, const std::vector<Ev>& evs,
                                      const ScheduleLimits& lim, const SolverOptions& opt = {});

// Uniform random rates inside the box, then projected onto each EV's feasible set.
ChargingSchedule stochastic_schedule(const std::vector<double>& baseline, const std::vector<Ev>& evs,
                                     const ScheduleLimits& lim, std::uint64_t seed);

// Rows `cds_id,ev_id,sub_interval,rate,soc`, with header.
std::string schedule_csv(int cds_id, const ChargingSchedule& s, bool header = true);

}  // namespace ptc::evdispatch
