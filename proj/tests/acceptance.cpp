#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ptcosim/config.hpp"
#include "ptcosim/cosim.hpp"
#include "ptcosim/evdispatch.hpp"
#include "ptcosim/market.hpp"
#include "ptcosim/netio.hpp"
#include "ptcosim/powerflow.hpp"
#include "ptcosim/traffic.hpp"

using namespace ptc;

namespace {

const std::string kData = PTC_TEST_DATA;
const std::string kRepo = PTC_REPO_DATA;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [miss]");
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int failures = 0;

void report(int id, const Verdict& v) {
  std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

template <class F>
void guarded(int id, F&& body) {
  try {
    report(id, body());
  } catch (const std::exception& e) {
    report(id, {false, std::string("exception: ") + e.what()});
  }
}

Verdict traffic_criterion() {
  Verdict v;
  using netio::TrafficNetwork;
  std::vector<netio::Link> links = {{1, 1, 2, 10.0, 100.0}, {2, 1, 2, 12.0, 100.0}};
  TrafficNetwork two({1, 2}, links, {{1, 2, 150.0}});
  const auto r2 = traffic::solve_sue_interval(two, two.od(), traffic::free_flow_costs(two).times, {});
  double lo = 0, hi = 150;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (traffic::bpr_time(10, 100, mid) < traffic::bpr_time(12, 100, 150 - mid) ? lo : hi) = mid;
  }
  const double err = std::max(std::abs(r2.flows[0] - lo), std::abs(r2.flows[1] - (150 - lo)));
  v.require(err <= 1e-3, fmt("two-link error %.2e veh", err));

  const auto sf = netio::load_traffic_network_files(kRepo + "/siouxfalls/SiouxFalls_net.tntp",
                                                    kRepo + "/siouxfalls/table1_trips.tntp");
  traffic::AssignmentOptions opt;
  opt.track_od_flows = true;
  opt.threads = 1;
  const auto t0 = Clock::now();
  const auto r = traffic::solve_sue_interval(sf, sf.od(), traffic::free_flow_costs(sf).times, opt);
  const double secs = seconds_since(t0);
  const auto w = traffic::wardrop_check(sf, sf.od(), r, 1e-9);
  v.require(w.worst_ratio <= 1e-3, fmt("Sioux Falls Wardrop excess %.2e f0 over %.0f paths", w.worst_ratio,
                                       static_cast<double>(w.paths_checked)));
  v.require(r.converged && r.gap <= 1e-4 && r.iterations <= 500,
            fmt("gap %.2e after %.0f iterations", r.gap, r.iterations));
  v.require(secs <= 10.0, fmt("%.2f s", secs));
  return v;
}

Verdict opf_criterion() {
  Verdict v;
  std::ifstream in(kData + "/opf/expected.json");
  const auto doc = nlohmann::json::parse(in);
  double worst_obj = 0, worst_v = 0, worst_gap = 0, worst_secs = 0;
  int worst_iter = 0, count = 0;
  bool converged = true;
  for (const auto& j : doc["instances"]) {
    const auto pn = netio::load_feeder_file(kData + "/opf/" + j["feeder"].get<std::string>());
    powerflow::OpfOptions opt;
    opt.alpha1 = j["alpha1"];
    opt.beta1 = j["beta1"];
    const auto t0 = Clock::now();
    const auto sol = powerflow::solve_opf(pn, {}, opt);
    worst_secs = std::max(worst_secs, seconds_since(t0));
    const double obj = j["objective"];
    worst_obj = std::max(worst_obj, std::abs(sol.objective - obj) / (1.0 + std::abs(obj)));
    const auto ids = j["bus_ids"].get<std::vector<int>>();
    const auto vs = j["v"].get<std::vector<double>>();
    for (std::size_t k = 0; k < ids.size(); ++k)
      worst_v = std::max(worst_v, std::abs(sol.state.v[pn.bus_index(ids[k])] - vs[k]) / vs[k]);
    if (!j["vmin_binding"].get<bool>()) worst_gap = std::max(worst_gap, sol.gap);
    worst_iter = std::max(worst_iter, sol.iterations);
    converged = converged && sol.converged;
    ++count;
  }
  v.require(worst_obj <= 1e-4, fmt("%.0f feeders, objective rel error %.2e", count, worst_obj));
  v.require(worst_v <= 1e-4, fmt("voltage rel error %.2e", worst_v));
  v.require(worst_gap <= 1e-5, fmt("exactness gap %.2e", worst_gap));
  v.require(converged && worst_iter <= 5000, fmt("max %.0f iterations", worst_iter));
  v.require(worst_secs <= 5.0, fmt("max %.2f s", worst_secs));
  return v;
}

Verdict market_criterion() {
  Verdict v;
  market::CostModel cm;
  cm.f_ps = {0.5, 0.0, 0.0};
  cm.f_uts = {0.0, 0.0, 0.0};
  cm.f_wt = {0.5, 0.0, 0.0};
  cm.gamma1 = 0.0;
  cm.tau1 = 1.0;
  cm.c1 = 1.0;
  const auto st = market::solve_equilibrium(cm, 10, 0, market::Bounds::uniform(1, -1e6, 1e6, -1e6, 1e6), {});
  const double err = std::max(std::abs(st.price - 5.0), std::abs(st.injections[0] - 5.0));
  v.require(st.converged && err <= 1e-5, fmt("analytic pi %.8f P %.8f", st.price, st.injections[0]));

  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool all_converged = true;
  for (int trial = 0; trial < 50; ++trial) {
    market::CostModel m;
    m.f_ps = {0.01 + u(rng), 10 * u(rng), u(rng)};
    m.f_uts = {0.01 * u(rng), u(rng), 0.0};
    m.f_wt = {0.01 + u(rng), u(rng), 0.0};
    m.gamma1 = 2 * u(rng);
    m.tau1 = 0.1 + u(rng);
    m.c1 = 0.5 + 2 * u(rng);
    const double q_pds = 5 + 20 * u(rng), q_uts = 50 * u(rng);
    market::Bounds b;
    b.price_lo = -1e6;
    b.price_hi = 1e6;
    const auto n = 1 + static_cast<std::size_t>(5 * u(rng));
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = -3 * u(rng);
      b.p_lo.push_back(lo);
      b.p_hi.push_back(lo + 0.1 + 4 * u(rng));
    }
    const auto s = market::solve_equilibrium(m, q_pds, q_uts, b, {});
    all_converged = all_converged && s.converged;
    worst = std::max(worst, std::abs(s.price - market::price_formula(m, q_pds, q_uts, s.injections)));
  }
  v.require(all_converged && worst <= 1e-5, fmt("50 random instances, max residual %.2e", worst));
  return v;
}

double variance(const std::vector<double>& x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double s = 0.0;
  for (double e : x) s += (e - mean) * (e - mean);
  return s / static_cast<double>(x.size());
}

Verdict schedule_criterion() {
  Verdict v;
  std::ifstream in(kData + "/schedule/instances.json");
  const auto doc = nlohmann::json::parse(in);
  double worst_obj = 0.0, worst_con = 0.0;
  int count = 0;
  for (const auto& j : doc["instances"]) {
    const auto baseline = j["baseline"].get<std::vector<double>>();
    const auto& l = j["limits"];
    const evdispatch::ScheduleLimits lim{l["rate_lo"], l["rate_hi"], l["soc_lo"], l["soc_hi"], l["dt"]};
    std::vector<evdispatch::Ev> evs;
    for (const auto& e : j["evs"]) evs.push_back({e["demand"], e["soc0"], e["capacity"]});
    const auto s = evdispatch::solve_smart_schedule(baseline, evs, lim);
    worst_obj = std::max(worst_obj, std::abs(s.objective - j["objective"].get<double>()));
    for (std::size_t i = 0; i < evs.size(); ++i) {
      double total = 0.0;
      for (double r : s.rates[i]) {
        worst_con = std::max({worst_con, lim.rate_lo - r, r - lim.rate_hi});
        total += r;
      }
      worst_con = std::max(worst_con, std::abs(total - evs[i].demand));
      for (double soc : s.soc[i]) worst_con = std::max({worst_con, lim.soc_lo - soc, soc - lim.soc_hi});
    }
    ++count;
  }
  v.require(count == 20 && worst_obj <= 1e-6, fmt("%.0f QP instances, objective error %.2e", count, worst_obj));
  v.require(worst_con <= 1e-8, fmt("constraint violation %.2e", worst_con));

  std::vector<double> baseline;
  for (int t = 0; t < 15; ++t) baseline.push_back(70 + 0.4 * t + (t % 3 == 0 ? 0.3 : -0.2));
  const evdispatch::ScheduleLimits lim{-0.01, 0.01, 0.2, 0.95, 1.0 / 60.0};
  std::vector<evdispatch::Ev> evs;
  for (int i = 0; i < 40; ++i) evs.push_back({0.1, 0.4 + 0.012 * i, 0.06});
  const double smart = variance(evdispatch::solve_smart_schedule(baseline, evs, lim).netload);
  int worse = 0;
  double lowest = 1e300;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const double random = variance(evdispatch::stochastic_schedule(baseline, evs, lim, seed).netload);
    lowest = std::min(lowest, random);
    if (smart > random + 1e-9) ++worse;
  }
  v.require(worse == 0, fmt("netload variance %.4f vs lowest stochastic %.4f over 100 draws", smart, lowest));
  return v;
}

struct Run {
  cosim::ScenarioReport report;
  cosim::Summary summary;
  double secs = 0.0;
};

Run run_config(const ScenarioConfig& cfg) {
  const auto nets = cosim::load_networks(cfg);
  const auto t0 = Clock::now();
  Run r;
  r.report = cosim::run_scenario(cfg, nets, cfg.load_profile, cfg.demand_profile);
  r.secs = seconds_since(t0);
  r.summary = cosim::summarize(r.report);
  return r;
}

ScenarioConfig scenario(const std::string& name) { return load_config(kRepo + "/scenarios/" + name + ".cfg"); }

double change(double before, double after) { return 100.0 * (after - before) / before; }

std::string evening_summary;

Verdict bipeak_criterion() {
  Verdict v;
  const auto evening = run_config(scenario("evening"));
  evening_summary = cosim::summary_json(evening.report);
  const auto& e = evening.summary;
  v.require(change(e.peak_before_mw, e.peak_after_mw) <= -5.0,
            fmt("evening peak %.2f -> %.2f MW (%+.1f%%)", e.peak_before_mw, e.peak_after_mw,
                change(e.peak_before_mw, e.peak_after_mw)));
  v.require(change(e.delay_before_h, e.delay_after_h) <= -15.0,
            fmt("total delay %.0f -> %.0f h (%+.1f%%)", e.delay_before_h, e.delay_after_h,
                change(e.delay_before_h, e.delay_after_h)));
  const auto midday = run_config(scenario("midday"));
  const auto& m = midday.summary;
  v.require(m.valley_after_mw > m.valley_before_mw,
            fmt("midday valley %.2f -> %.2f MW", m.valley_before_mw, m.valley_after_mw));
  const double secs = std::max(evening.secs, midday.secs);
  v.require(secs <= 120.0, fmt("24 intervals in %.1f s", secs));
  return v;
}

Verdict social_cost_criterion() {
  Verdict v;
  double previous_gap = -1e300;
  bool below = true, monotone = true;
  std::string gaps;
  for (int k = 2; k <= 10; k += 2) {
    auto cfg = scenario("flat60");
    cfg.demand_profile.assign(cfg.demand_profile.size(), k / 10.0);
    const auto s = run_config(cfg).summary;
    const double gap = s.social_cost_before - s.social_cost_after;
    below = below && gap > 0.0;
    monotone = monotone && gap >= previous_gap;
    previous_gap = gap;
    gaps += (gaps.empty() ? "" : " ") + fmt("%.1f", gap);
  }
  v.require(below, "coordinated below baseline at OD scale 0.2..1.0");
  v.require(monotone, "gap non-decreasing: " + gaps);
  return v;
}

Verdict determinism_criterion() {
  Verdict v;
  const auto again = cosim::summary_json(run_config(scenario("evening")).report);
  v.require(!evening_summary.empty() && again == evening_summary,
            fmt("summary.json %.0f bytes, identical across runs", static_cast<double>(again.size())));
  return v;
}

}  // namespace

int main() {
  guarded(1, traffic_criterion);
  guarded(2, opf_criterion);
  guarded(3, market_criterion);
  guarded(4, schedule_criterion);
  guarded(5, bipeak_criterion);
  guarded(6, social_cost_criterion);
  guarded(7, determinism_criterion);
  std::printf("%d of 7 criteria met\n", 7 - failures);
  return failures == 0 ? 0 : 1;
}
