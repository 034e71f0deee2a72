#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ptcosim/config.hpp"
#include "ptcosim/evdispatch.hpp"
#include "ptcosim/market.hpp"
#include "ptcosim/netio.hpp"
#include "ptcosim/traffic.hpp"

namespace ptc::cosim {

struct Networks {
  netio::TrafficNetwork traffic;  // capacities in vehicles per interval
  netio::PowerNetwork feeder;
  std::vector<netio::CdsSite> sites;
};

// Loads the road network (capacities times capacity_scale), the feeder and the sites named in `cfg`.
Networks load_networks(const ScenarioConfig& cfg);

struct IntervalInputs {
  int t = 0;                   // index within the horizon
  double load_mw = 0.0;        // feeder netload before EV feedback
  double demand_factor = 1.0;  // multiplier on the base OD table
  bool has_next = false;       // whether interval t + 1 lies inside the horizon
  double next_demand_factor = 0.0;
  std::vector<double> window_load_mw;  // feeder netload per sub-interval of the parking window after t
};

// Effects of earlier decisions on later intervals, keyed by interval index.
struct Feedback {
  std::map<int, std::vector<double>> discharge_mw;     // per CDS, mean over the interval
  std::map<int, std::vector<netio::OdDemand>> od;      // signed OD changes
  std::map<int, double> arrivals;                      // diverted vehicles reaching a CDS
  std::map<int, double> reentry;                       // vehicles leaving a CDS
  std::map<int, std::vector<double>> occupancy;        // vehicles parked per CDS during the interval
};

struct CdsOutcome {
  int cds_id = 0;
  double p_eq_mw = 0.0;     // equilibrium injection
  double s_opf_mw = 0.0;    // OPF injection under the equilibrium cap
  double inflow = 0.0;      // vehicles entering the CDS node
  evdispatch::ParkingDecision parking;
  double diverted = 0.0;    // vehicles taken off their trips next interval
  double terminating = 0.0; // parked vehicles whose trips end at the CDS node
  int evs = 0;              // vehicles scheduled in the parking window
  double target_mw = 0.0;   // mean window injection asked of the EVs
  double scheduled_mw = 0.0;  // mean window injection delivered by the schedule
  double discharge_mw = 0.0;  // EV injection landing in this interval
  double smart_flatness = 0.0;
  double stochastic_flatness = 0.0;
  evdispatch::ChargingSchedule schedule;
};

struct StageTimes {
  double market_ms = 0.0;
  double traffic_ms = 0.0;
  double opf_ms = 0.0;
  double dispatch_ms = 0.0;
};

struct IntervalState {
  int t = -1;
  double load_mw = 0.0;  // before EV feedback
  double q_pds = 0.0;    // after EV feedback, MW
  double q_uts = 0.0;    // trips leaving their origins; CDS re-entries excluded
  double base_trips = 0.0;
  double reentered = 0.0;  // vehicles resuming trips from a CDS
  double diverted = 0.0;  // vehicles whose trips end at a CDS this interval
  market::EquilibriumState equilibrium;
  traffic::LinkFlow flows;
  std::vector<double> link_times;
  int traffic_iterations = 0;
  double traffic_gap = 0.0;
  bool traffic_converged = true;
  double delay_hours = 0.0;
  double opf_objective = 0.0;
  double opf_gap = 0.0;
  int opf_iterations = 0;
  bool opf_converged = true;
  std::vector<CdsOutcome> cds;
  double social_cost = 0.0;
  Feedback pending;
  std::vector<std::string> warnings;
  StageTimes times;
};

// State before the first interval: free-flow link times, no pending feedback.
IntervalState initial_state(const Networks& nets);

// Equilibrium, traffic assignment, OPF, parking and smart charging for one interval,
// followed by the feedback for later intervals.
IntervalState run_interval(const IntervalState& prev, const IntervalInputs& in, const Networks& nets,
                           const ScenarioConfig& cfg);

struct ScenarioReport {
  std::vector<IntervalState> baseline;     // coordination disabled
  std::vector<IntervalState> coordinated;  // as configured
  int start_interval = 0;
  double interval_minutes = 15.0;
  double wall_ms = 0.0;
};

// Inputs of interval t, with the window baseline interpolated from the profile.
IntervalInputs interval_inputs(const ScenarioConfig& cfg, const std::vector<double>& load_profile,
                               const std::vector<double>& demand_profile, int t);

ScenarioReport run_scenario(const ScenarioConfig& cfg, const Networks& nets, const std::vector<double>& load_profile,
                            const std::vector<double>& demand_profile);

struct Summary {
  double peak_before_mw = 0.0;
  double peak_after_mw = 0.0;
  double valley_before_mw = 0.0;
  double valley_after_mw = 0.0;
  double delay_before_h = 0.0;
  double delay_after_h = 0.0;
  double social_cost_before = 0.0;
  double social_cost_after = 0.0;
  double ev_energy_mwh = 0.0;      // net EV discharge delivered inside the horizon
  double vehicles_diverted = 0.0;
  double vehicles_pending = 0.0;   // diverted vehicles re-entering after the horizon
  int warnings = 0;
};

Summary summarize(const ScenarioReport& r);

// Deterministic: no timings.
std::string summary_json(const ScenarioReport& r);
std::string timings_json(const ScenarioReport& r);
// CSV series keyed by file name.
std::map<std::string, std::string> report_csvs(const ScenarioReport& r);

// Writes every CSV plus summary.json and timings.json into `dir`, each through a temporary file and rename.
void write_report(const ScenarioReport& r, const std::filesystem::path& dir);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// "HH:MM" of interval `t` counted from `start_interval`.
std::string clock_label(int start_interval, double interval_minutes, int t);

}  // namespace ptc::cosim
