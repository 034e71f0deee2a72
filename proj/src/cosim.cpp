#include "ptcosim/cosim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "ptcosim/error.hpp"
#include "ptcosim/powerflow.hpp"

namespace ptc::cosim {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string num(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

double nominal_load_mw(const netio::PowerNetwork& pn) {
  double total = 0.0;
  for (const auto& b : pn.buses()) total += b.load.real();
  return total * pn.base_mva();
}

// Sub-intervals of the parking window and the number of intervals it spans.
int window_length(const ScenarioConfig& cfg) {
  return static_cast<int>(std::lround(cfg.tau2_minutes / cfg.sub_interval_minutes));
}
int reentry_offset(const ScenarioConfig& cfg) {
  return std::max(1, static_cast<int>(std::ceil(cfg.tau2_minutes / cfg.interval_minutes - 1e-9)));
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void add_od(std::vector<netio::OdDemand>& od, int o, int d, double v) {
  for (auto& e : od) {
    if (e.origin == o && e.destination == d) {
      e.vehicles += v;
      return;
    }
  }
  od.push_back({o, d, v});
}

}  // namespace

Networks load_networks(const ScenarioConfig& cfg) {
  if (cfg.traffic_net.empty() || cfg.traffic_trips.empty() || cfg.feeder.empty())
    fail(ErrorKind::Validation, "configuration needs traffic_net, traffic_trips and feeder");
  Networks n;
  n.traffic = netio::load_traffic_network_files(cfg.resolve(cfg.traffic_net), cfg.resolve(cfg.traffic_trips))
                  .with_capacity_scale(cfg.capacity_scale);
  n.feeder = netio::load_feeder_file(cfg.resolve(cfg.feeder));
  n.sites = netio::couple_sites(cfg, n.traffic, n.feeder, cfg.sites);
  return n;
}

IntervalState initial_state(const Networks& nets) {
  IntervalState s;
  s.link_times = traffic::free_flow_costs(nets.traffic).times;
  return s;
}

IntervalState run_interval(const IntervalState& prev, const IntervalInputs& in, const Networks& nets,
                           const ScenarioConfig& cfg) {
  const auto& tn = nets.traffic;
  const auto& pn = nets.feeder;
  const std::size_t ncds = nets.sites.size();
  const bool coord = cfg.coordination && ncds > 0;
  const int T = window_length(cfg);
  if (coord && T < 2) fail(ErrorKind::Validation, "tau2_minutes must cover at least two sub-intervals");

  IntervalState s;
  s.t = in.t;
  s.pending = prev.pending;
  s.load_mw = in.load_mw;

  // Feedback landing now.
  std::vector<double> discharge(ncds, 0.0);
  if (auto it = s.pending.discharge_mw.find(in.t); it != s.pending.discharge_mw.end()) {
    discharge = it->second;
    s.pending.discharge_mw.erase(it);
  }
  s.q_pds = in.load_mw - std::accumulate(discharge.begin(), discharge.end(), 0.0);

  std::vector<netio::OdDemand> od;
  for (const auto& e : tn.od()) {
    od.push_back({e.origin, e.destination, e.vehicles * in.demand_factor});
    s.base_trips += e.vehicles * in.demand_factor;
  }
  if (auto it = s.pending.od.find(in.t); it != s.pending.od.end()) {
    for (const auto& e : it->second) add_od(od, e.origin, e.destination, e.vehicles);
    s.pending.od.erase(it);
  }
  if (auto it = s.pending.arrivals.find(in.t); it != s.pending.arrivals.end()) {
    s.diverted = it->second;
    s.pending.arrivals.erase(it);
  }
  for (auto& e : od) e.vehicles = std::max(0.0, e.vehicles);
  s.pending.occupancy.erase(in.t);
  if (auto it = s.pending.reentry.find(in.t); it != s.pending.reentry.end()) {
    s.reentered = it->second;
    s.pending.reentry.erase(it);
  }
  for (const auto& e : od) s.q_uts += e.vehicles;
  s.q_uts -= s.reentered;

  // (a) equilibrium
  auto t0 = Clock::now();
  const auto cm = market::CostModel::from_config(cfg);
  const auto bounds = market::Bounds::uniform(ncds, cfg.price_min, cfg.price_max, coord ? cfg.cds_p_min : 0.0,
                                              coord ? cfg.cds_p_max : 0.0);
  market::SolveOptions mopt;
  mopt.gamma2 = cfg.gamma2;
  mopt.eps = cfg.eps_eq;
  mopt.max_iter = cfg.max_iter_eq;
  if (prev.equilibrium.injections.size() == ncds) mopt.start = prev.equilibrium.injections;
  s.equilibrium = market::solve_equilibrium(cm, s.q_pds, s.q_uts, bounds, mopt);
  if (!s.equilibrium.converged) s.warnings.push_back("equilibrium did not converge");
  s.times.market_ms = ms_since(t0);

  // (b) traffic assignment
  t0 = Clock::now();
  traffic::AssignmentOptions topt;
  topt.eps = cfg.eps_traffic;
  topt.max_iter = cfg.max_iter_traffic;
  topt.golden_tol = cfg.golden_tol;
  topt.threads = cfg.threads;
  topt.track_od_flows = coord && in.has_next;
  const auto assignment = traffic::solve_sue_interval(tn, od, prev.link_times, topt);
  s.flows = assignment.flows;
  s.link_times = traffic::link_costs(tn, assignment.flows).times;
  s.traffic_iterations = assignment.iterations;
  s.traffic_gap = assignment.gap;
  s.traffic_converged = assignment.converged;
  s.delay_hours = traffic::total_delay_hours(tn, assignment.flows);
  if (!assignment.converged) s.warnings.push_back("traffic assignment did not converge");
  s.times.traffic_ms = ms_since(t0);

  // (c) OPF with the equilibrium injections as caps
  t0 = Clock::now();
  const double base = pn.base_mva();
  const double nominal = nominal_load_mw(pn);
  auto feeder = powerflow::scale_loads(pn, nominal > 0 ? in.load_mw / nominal : 0.0);
  std::vector<powerflow::GenerationCap> caps;
  std::vector<std::size_t> cap_of(ncds, 0);
  for (std::size_t k = 0; k < ncds; ++k) {
    const int bus = nets.sites[k].pds_bus;
    feeder.mutable_buses()[feeder.bus_index(bus)].load -= discharge[k] / base;
    if (!coord) continue;
    auto it = std::find_if(caps.begin(), caps.end(), [&](const auto& c) { return c.bus == bus; });
    if (it == caps.end()) {
      caps.push_back({bus, 0.0, 0.0});
      it = caps.end() - 1;
    }
    it->p_min += cfg.cds_p_min / base;
    it->p_max += s.equilibrium.injections[k] / base;
    cap_of[k] = static_cast<std::size_t>(it - caps.begin());
  }
  powerflow::OpfOptions popt;
  popt.alpha1 = cfg.alpha1;
  popt.beta1 = cfg.beta1;
  popt.rho = cfg.rho;
  popt.eps = cfg.eps_admm;
  popt.max_iter = cfg.max_iter_admm;
  popt.threads = cfg.threads;
  const auto opf = powerflow::solve_opf(feeder, caps, popt);
  s.opf_objective = opf.objective;
  s.opf_gap = opf.gap;
  s.opf_iterations = opf.iterations;
  s.opf_converged = opf.converged;
  if (!opf.converged) s.warnings.push_back("OPF did not converge");
  s.times.opf_ms = ms_since(t0);

  // (d) parking and smart charging for the window after this interval
  t0 = Clock::now();
  auto park = evdispatch::ParkingParams::from_config(cfg);
  if (!coord) park.ratio_high = park.ratio_mid = 0.0;
  std::vector<double> node_inflow(tn.node_count(), 0.0);
  for (std::size_t a = 0; a < tn.link_count(); ++a) node_inflow[tn.node_index(tn.links()[a].head)] += s.flows[a];

  s.cds.resize(ncds);
  std::vector<double> remaining;  // next interval base demand still available for diversion
  for (const auto& e : tn.od()) remaining.push_back(e.vehicles * in.next_demand_factor);
  const int spi = cfg.sub_intervals_per_interval();
  const int k_re = reentry_offset(cfg);
  std::vector<double> share(ncds, 0.0);
  for (std::size_t k = 0; k < ncds; ++k) {
    auto& c = s.cds[k];
    const auto& site = nets.sites[k];
    c.cds_id = site.cds_id;
    c.p_eq_mw = s.equilibrium.injections.empty() ? 0.0 : s.equilibrium.injections[k];
    if (coord) {
      const auto& cap = caps[cap_of[k]];
      const double cap_total = cap.p_max * base;
      const double frac = std::abs(cap_total) > 1e-12 ? c.p_eq_mw / cap_total : 0.0;
      c.s_opf_mw = opf.injections[cap_of[k]] * base * frac;
    }
    c.discharge_mw = discharge[k];
    c.inflow = node_inflow[tn.node_index(site.uts_node)];
    auto station = park;
    if (auto it = s.pending.occupancy.find(in.t + 1); it != s.pending.occupancy.end())
      station.capacity = std::max(0.0, station.capacity - it->second[k]);
    c.parking = evdispatch::parked_evs(s.equilibrium.price, c.s_opf_mw, c.inflow, station, site.cds_id);
    const double bus_load = pn.buses()[pn.bus_index(site.pds_bus)].load.real() * base;
    share[k] = nominal > 0 ? bus_load / nominal : 0.0;

    if (!coord || !in.has_next || c.parking.parked <= 0.0) continue;
    // Parked vehicles come from the next interval's base trips entering the CDS node. Trips passing
    // through are split there; trips ending there stay parked without changing the OD table.
    std::vector<double> through(tn.od().size(), 0.0);
    double total_through = 0.0;
    for (std::size_t e = 0; e < tn.od().size(); ++e) {
      const auto& pair = tn.od()[e];
      if (pair.origin == site.uts_node) continue;
      const auto pos = std::find_if(od.begin(), od.end(), [&](const auto& x) {
        return x.origin == pair.origin && x.destination == pair.destination;
      });
      const auto& f = assignment.od_flows[static_cast<std::size_t>(pos - od.begin())];
      for (std::size_t a = 0; a < tn.link_count(); ++a)
        if (tn.links()[a].head == site.uts_node) through[e] += f[a];
      total_through += through[e];
    }
    if (total_through <= 0.0) continue;
    std::vector<netio::OdDemand> next_od, later_od;
    for (std::size_t e = 0; e < tn.od().size(); ++e) {
      const double x = std::min(remaining[e], c.parking.parked * through[e] / total_through);
      if (x <= 0.0) continue;
      const auto& pair = tn.od()[e];
      remaining[e] -= x;
      if (pair.destination == site.uts_node) {
        c.terminating += x;
        continue;
      }
      c.diverted += x;
      add_od(next_od, pair.origin, pair.destination, -x);
      add_od(next_od, pair.origin, site.uts_node, x);
      add_od(later_od, site.uts_node, pair.destination, x);
    }
    for (const auto& e : next_od) add_od(s.pending.od[in.t + 1], e.origin, e.destination, e.vehicles);
    for (const auto& e : later_od) add_od(s.pending.od[in.t + 1 + k_re], e.origin, e.destination, e.vehicles);
    if (c.diverted > 0.0) {
      s.pending.arrivals[in.t + 1] += c.diverted;
      s.pending.reentry[in.t + 1 + k_re] += c.diverted;
    }
    for (int u = in.t + 1; u <= in.t + k_re; ++u) {
      auto& occ = s.pending.occupancy[u];
      occ.resize(ncds, 0.0);
      occ[k] += c.diverted + c.terminating;
    }
    c.evs = static_cast<int>(std::floor(c.diverted + c.terminating + 1e-9));
  }

  const evdispatch::ScheduleLimits lim{cfg.ev_rate_min, cfg.ev_rate_max, cfg.soc_min, cfg.soc_max,
                                       cfg.sub_interval_minutes / 60.0};
  parallel_for(ncds, cfg.threads, [&](std::size_t k) {
    auto& c = s.cds[k];
    if (c.evs <= 0) return;
    std::mt19937_64 rng(mix(cfg.seed, static_cast<std::uint64_t>(in.t), static_cast<std::uint64_t>(c.cds_id)));
    std::uniform_real_distribution<double> soc0(cfg.ev_soc0_min, cfg.ev_soc0_max);
    std::vector<evdispatch::Ev> evs(static_cast<std::size_t>(c.evs));
    for (auto& ev : evs) {
      ev.soc0 = soc0(rng);
      ev.capacity = cfg.ev_battery_mwh;
    }
    c.target_mw = c.s_opf_mw;
    const double per_ev = c.s_opf_mw * T / c.evs;
    for (auto& ev : evs) {
      const auto range = evdispatch::achievable_demand(ev, lim, static_cast<std::size_t>(T));
      ev.demand = range.feasible ? std::clamp(per_ev, range.lo, range.hi) : 0.0;
    }
    std::vector<double> baseline(static_cast<std::size_t>(T));
    for (int j = 0; j < T; ++j) baseline[j] = share[k] * in.window_load_mw[static_cast<std::size_t>(j)];
    c.schedule = evdispatch::solve_smart_schedule(baseline, evs, lim);
    const auto stochastic = evdispatch::stochastic_schedule(baseline, evs, lim, mix(cfg.seed, in.t, 1000003u + c.cds_id));
    c.smart_flatness = c.schedule.objective;
    c.stochastic_flatness = evdispatch::flatness_objective(stochastic.netload);
    double total = 0.0;
    for (double d : c.schedule.demand) total += d;
    c.scheduled_mw = total / T;
  });
  for (std::size_t k = 0; k < ncds; ++k) {
    const auto& c = s.cds[k];
    if (c.evs <= 0) continue;
    if (!c.schedule.converged) s.warnings.push_back("smart schedule did not converge at CDS " + std::to_string(c.cds_id));
    for (int j = 0; j < T; ++j) {
      double rate = 0.0;
      for (const auto& r : c.schedule.rates) rate += r[static_cast<std::size_t>(j)];
      auto& slot = s.pending.discharge_mw[in.t + 1 + j / spi];
      slot.resize(ncds, 0.0);
      slot[k] += rate / spi;
    }
  }
  s.times.dispatch_ms = ms_since(t0);

  s.social_cost = market::utility_cost(cm, s.load_mw, s.q_uts, discharge);
  return s;
}

IntervalInputs interval_inputs(const ScenarioConfig& cfg, const std::vector<double>& load_profile,
                               const std::vector<double>& demand_profile, int t) {
  const int H = static_cast<int>(load_profile.size());
  IntervalInputs in;
  in.t = t;
  in.load_mw = load_profile[static_cast<std::size_t>(t)];
  in.demand_factor = demand_profile[static_cast<std::size_t>(t)];
  in.has_next = t + 1 < H;
  in.next_demand_factor = in.has_next ? demand_profile[static_cast<std::size_t>(t + 1)] : 0.0;
  // Profile values sit at interval midpoints; sub-interval values interpolate linearly between them.
  const int spi = cfg.sub_intervals_per_interval();
  const int T = window_length(cfg);
  auto at = [&](double x) {
    x = std::clamp(x, 0.0, static_cast<double>(H - 1));
    const auto i = static_cast<std::size_t>(std::floor(x));
    if (i + 1 >= static_cast<std::size_t>(H)) return load_profile.back();
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * load_profile[i] + w * load_profile[i + 1];
  };
  for (int j = 0; j < T; ++j) in.window_load_mw.push_back(at(t + 1 + (j + 0.5) / spi - 0.5));
  return in;
}

ScenarioReport run_scenario(const ScenarioConfig& cfg, const Networks& nets, const std::vector<double>& load_profile,
                            const std::vector<double>& demand_profile) {
  cfg.validate();
  if (load_profile.empty() || load_profile.size() != demand_profile.size())
    fail(ErrorKind::Validation, "load and demand profiles must be non-empty and of equal length");
  if (static_cast<int>(load_profile.size()) != cfg.horizon)
    fail(ErrorKind::Validation, "profile length " + std::to_string(load_profile.size()) + " differs from horizon " +
                                    std::to_string(cfg.horizon));
  const auto t0 = Clock::now();
  ScenarioReport r;
  r.start_interval = cfg.start_interval;
  r.interval_minutes = cfg.interval_minutes;
  auto run = [&](const ScenarioConfig& c) {
    std::vector<IntervalState> out;
    IntervalState state = initial_state(nets);
    for (int t = 0; t < c.horizon; ++t) {
      try {
        state = run_interval(state, interval_inputs(c, load_profile, demand_profile, t), nets, c);
      } catch (const Error& e) {
        fail(e.kind(), "interval " + std::to_string(t) + ": " + e.what());
      }
      out.push_back(state);
    }
    return out;
  };
  ScenarioConfig base = cfg;
  base.coordination = false;
  r.baseline = run(base);
  r.coordinated = cfg.coordination ? run(cfg) : r.baseline;
  r.wall_ms = ms_since(t0);
  return r;
}

Summary summarize(const ScenarioReport& r) {
  Summary s;
  auto peak = [](const std::vector<IntervalState>& xs, bool hi) {
    double v = hi ? -1e300 : 1e300;
    for (const auto& x : xs) v = hi ? std::max(v, x.q_pds) : std::min(v, x.q_pds);
    return xs.empty() ? 0.0 : v;
  };
  s.peak_before_mw = peak(r.baseline, true);
  s.peak_after_mw = peak(r.coordinated, true);
  s.valley_before_mw = peak(r.baseline, false);
  s.valley_after_mw = peak(r.coordinated, false);
  for (const auto& x : r.baseline) {
    s.delay_before_h += x.delay_hours;
    s.social_cost_before += x.social_cost;
  }
  const double hours = r.interval_minutes / 60.0;
  for (const auto& x : r.coordinated) {
    s.delay_after_h += x.delay_hours;
    s.social_cost_after += x.social_cost;
    s.ev_energy_mwh += (x.load_mw - x.q_pds) * hours;
    s.vehicles_diverted += x.diverted;
    s.warnings += static_cast<int>(x.warnings.size());
  }
  if (!r.coordinated.empty())
    for (const auto& [t, v] : r.coordinated.back().pending.reentry) s.vehicles_pending += v;
  return s;
}

std::string summary_json(const ScenarioReport& r) {
  const auto s = summarize(r);
  nlohmann::ordered_json j;
  j["intervals"] = r.coordinated.size();
  j["start"] = clock_label(r.start_interval, r.interval_minutes, 0);
  j["peak_netload_mw"] = {{"before", s.peak_before_mw}, {"after", s.peak_after_mw}};
  j["valley_netload_mw"] = {{"before", s.valley_before_mw}, {"after", s.valley_after_mw}};
  j["total_delay_h"] = {{"before", s.delay_before_h}, {"after", s.delay_after_h}};
  j["social_cost"] = {{"before", s.social_cost_before}, {"after", s.social_cost_after}};
  j["ev_energy_mwh"] = s.ev_energy_mwh;
  j["vehicles_diverted"] = s.vehicles_diverted;
  j["vehicles_pending"] = s.vehicles_pending;
  int fw = 0, admm = 0, eq = 0;
  for (const auto& x : r.coordinated) {
    fw += x.traffic_iterations;
    admm += x.opf_iterations;
    eq += x.equilibrium.iterations;
  }
  j["iterations"] = {{"equilibrium", eq}, {"traffic", fw}, {"opf", admm}};
  j["warnings"] = s.warnings;
  return j.dump(2) + "\n";
}

std::string timings_json(const ScenarioReport& r) {
  StageTimes sum;
  for (const auto* run : {&r.baseline, &r.coordinated})
    for (const auto& x : *run) {
      sum.market_ms += x.times.market_ms;
      sum.traffic_ms += x.times.traffic_ms;
      sum.opf_ms += x.times.opf_ms;
      sum.dispatch_ms += x.times.dispatch_ms;
    }
  nlohmann::ordered_json j;
  j["wall_ms"] = r.wall_ms;
  j["stage_ms"] = {{"equilibrium", sum.market_ms},
                   {"traffic", sum.traffic_ms},
                   {"opf", sum.opf_ms},
                   {"dispatch", sum.dispatch_ms}};
  return j.dump(2) + "\n";
}

std::string clock_label(int start_interval, double interval_minutes, int t) {
  const long minutes = std::lround((start_interval + t) * interval_minutes);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02ld:%02ld", (minutes / 60) % 24, minutes % 60);
  return buf;
}

std::map<std::string, std::string> report_csvs(const ScenarioReport& r) {
  std::map<std::string, std::string> out;
  auto label = [&](int t) { return clock_label(r.start_interval, r.interval_minutes, t); };
  std::ostringstream netload, delay, marketcsv, social, cds, solver, schedules;
  netload << "interval,clock,before_mw,after_mw,ev_injection_mw\n";
  delay << "interval,clock,before_h,after_h\n";
  marketcsv << "interval,clock,price_before,price_after,q_uts_before,q_uts_after,injection_mw\n";
  social << "interval,clock,before,after\n";
  cds << "interval,clock,cds_id,p_eq_mw,s_opf_mw,inflow,regime,parked,diverted,terminating,evs,scheduled_mw,discharge_mw,"
         "smart_flatness,stochastic_flatness\n";
  solver << "run,interval,equilibrium_iterations,equilibrium_converged,traffic_iterations,traffic_gap,"
            "traffic_converged,opf_iterations,opf_converged,exactness_gap\n";
  schedules << "interval,cds_id,ev_id,sub_interval,rate,soc\n";
  for (std::size_t t = 0; t < r.coordinated.size(); ++t) {
    const auto& b = r.baseline[t];
    const auto& c = r.coordinated[t];
    const int ti = static_cast<int>(t);
    netload << t << ',' << label(ti) << ',' << num(b.q_pds) << ',' << num(c.q_pds) << ','
            << num(c.load_mw - c.q_pds) << '\n';
    delay << t << ',' << label(ti) << ',' << num(b.delay_hours) << ',' << num(c.delay_hours) << '\n';
    double inj = 0.0;
    for (double p : c.equilibrium.injections) inj += p;
    marketcsv << t << ',' << label(ti) << ',' << num(b.equilibrium.price) << ',' << num(c.equilibrium.price) << ','
              << num(b.q_uts) << ',' << num(c.q_uts) << ',' << num(inj) << '\n';
    social << t << ',' << label(ti) << ',' << num(b.social_cost) << ',' << num(c.social_cost) << '\n';
    for (const auto& x : c.cds) {
      cds << t << ',' << label(ti) << ',' << x.cds_id << ',' << num(x.p_eq_mw) << ',' << num(x.s_opf_mw) << ','
          << num(x.inflow) << ',' << evdispatch::regime_name(x.parking.regime) << ',' << num(x.parking.parked) << ','
          << num(x.diverted) << ',' << num(x.terminating) << ',' << x.evs << ',' << num(x.scheduled_mw) << ',' << num(x.discharge_mw) << ','
          << num(x.smart_flatness) << ',' << num(x.stochastic_flatness) << '\n';
      if (x.evs > 0) {
        std::istringstream rows(evdispatch::schedule_csv(x.cds_id, x.schedule, false));
        for (std::string line; std::getline(rows, line);) schedules << t << ',' << line << '\n';
      }
    }
    for (const auto* run : {&b, &c}) {
      solver << (run == &b ? "baseline" : "coordinated") << ',' << t << ',' << run->equilibrium.iterations << ','
             << run->equilibrium.converged << ',' << run->traffic_iterations << ',' << num(run->traffic_gap) << ','
             << run->traffic_converged << ',' << run->opf_iterations << ',' << run->opf_converged << ','
             << num(run->opf_gap) << '\n';
    }
  }
  out["netload.csv"] = netload.str();
  out["delay.csv"] = delay.str();
  out["market.csv"] = marketcsv.str();
  out["social_cost.csv"] = social.str();
  out["cds.csv"] = cds.str();
  out["solver.csv"] = solver.str();
  out["schedules.csv"] = schedules.str();
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorKind::Io, "cannot write " + tmp.string());
    f << text;
    f.flush();
    if (!f) fail(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_report(const ScenarioReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& [name, text] : report_csvs(r)) write_text_atomic(dir / name, text);
  write_text_atomic(dir / "timings.json", timings_json(r));
  write_text_atomic(dir / "summary.json", summary_json(r));
}

}  // namespace ptc::cosim
