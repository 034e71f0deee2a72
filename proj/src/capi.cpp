#include "ptcosim/ptcosim.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <new>
#include <sstream>
#include <string>

#include "ptcosim/config.hpp"
#include "ptcosim/cosim.hpp"
#include "ptcosim/error.hpp"
#include "ptcosim/evdispatch.hpp"
#include "ptcosim/market.hpp"
#include "ptcosim/netio.hpp"
#include "ptcosim/powerflow.hpp"
#include "ptcosim/traffic.hpp"

struct ptc_config {
  ptc::ScenarioConfig cfg;
};

struct ptc_report {
  ptc::cosim::ScenarioReport report;
};

namespace {

using namespace ptc;

thread_local std::string g_last_error;

ptc_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return PTC_ERR_PARSE;
    case ErrorKind::Validation: return PTC_ERR_VALIDATION;
    case ErrorKind::Io: return PTC_ERR_IO;
    case ErrorKind::InvalidArgument: return PTC_ERR_INVALID_ARGUMENT;
    case ErrorKind::Infeasible: return PTC_ERR_INFEASIBLE;
    case ErrorKind::Divergence: return PTC_ERR_NOT_CONVERGED;
  }
  return PTC_ERR_INTERNAL;
}

template <class F>
ptc_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return PTC_ERR_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) fail(ErrorKind::InvalidArgument, what);
}

ptc_status not_converged(const ScenarioConfig& cfg, bool converged, const std::string& what) {
  if (converged || !cfg.strict) return PTC_OK;
  g_last_error = what + " did not converge";
  return PTC_ERR_NOT_CONVERGED;
}

ptc_status copy_text(const std::string& text, char* buf, std::size_t len, std::size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (buf && len > text.size()) {
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return PTC_OK;
  }
  if (!buf && needed) return PTC_OK;
  g_last_error = "buffer too small";
  return PTC_ERR_INVALID_ARGUMENT;
}

std::filesystem::path out_path(const char* dir) {
  std::filesystem::path p = dir && *dir ? dir : ".";
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + p.string() + ": " + ec.message());
  return p;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string read_file(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, std::string("cannot open ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const ScenarioConfig& or_default(const ptc_config* cfg) {
  static const ScenarioConfig defaults{};
  return cfg ? cfg->cfg : defaults;
}

}  // namespace

extern "C" {

const char* ptc_last_error(void) { return g_last_error.c_str(); }

const char* ptc_status_name(ptc_status status) {
  switch (status) {
    case PTC_OK: return "ok";
    case PTC_ERR_PARSE: return "parse error";
    case PTC_ERR_VALIDATION: return "validation error";
    case PTC_ERR_IO: return "I/O error";
    case PTC_ERR_NOT_CONVERGED: return "not converged";
    case PTC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PTC_ERR_INFEASIBLE: return "infeasible";
    case PTC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

ptc_status ptc_config_new(ptc_config** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new ptc_config{};
    return PTC_OK;
  });
}

ptc_status ptc_config_load(const char* path, ptc_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = nullptr;
    auto cfg = load_config(path);
    *out = new ptc_config{std::move(cfg)};
    return PTC_OK;
  });
}

ptc_status ptc_config_set(ptc_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "null argument");
    cfg->cfg.set(key, value);
    return PTC_OK;
  });
}

ptc_status ptc_config_get(const ptc_config* cfg, const char* key, char* buf, size_t len, size_t* needed) {
  return guarded([&] {
    require(cfg && key, "null argument");
    return copy_text(cfg->cfg.get(key), buf, len, needed);
  });
}

ptc_status ptc_config_validate(const ptc_config* cfg) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    cfg->cfg.validate();
    return PTC_OK;
  });
}

void ptc_config_free(ptc_config* cfg) { delete cfg; }

ptc_status ptc_scenario_check(const ptc_config* cfg, ptc_scenario_info* info) {
  return guarded([&] {
    require(cfg != nullptr, "null config");
    cfg->cfg.validate();
    const auto nets = cosim::load_networks(cfg->cfg);
    if (info) {
      info->nodes = nets.traffic.node_count();
      info->links = nets.traffic.link_count();
      info->od_pairs = nets.traffic.od().size();
      info->buses = nets.feeder.bus_count();
      info->branches = nets.feeder.branches().size();
      info->sites = nets.sites.size();
    }
    return PTC_OK;
  });
}

ptc_status ptc_run_scenario(const ptc_config* cfg, ptc_report** out) {
  return guarded([&] {
    require(cfg && out, "null argument");
    *out = nullptr;
    const auto& c = cfg->cfg;
    c.validate();
    const auto nets = cosim::load_networks(c);
    auto* r = new ptc_report{cosim::run_scenario(c, nets, c.load_profile, c.demand_profile)};
    *out = r;
    return not_converged(c, cosim::summarize(r->report).warnings == 0, "a sub-solver");
  });
}

ptc_status ptc_report_summary(const ptc_report* report, ptc_summary* out) {
  return guarded([&] {
    require(report && out, "null argument");
    const auto s = cosim::summarize(report->report);
    out->intervals = static_cast<int>(report->report.coordinated.size());
    out->peak_before_mw = s.peak_before_mw;
    out->peak_after_mw = s.peak_after_mw;
    out->valley_before_mw = s.valley_before_mw;
    out->valley_after_mw = s.valley_after_mw;
    out->delay_before_h = s.delay_before_h;
    out->delay_after_h = s.delay_after_h;
    out->social_cost_before = s.social_cost_before;
    out->social_cost_after = s.social_cost_after;
    out->ev_energy_mwh = s.ev_energy_mwh;
    out->vehicles_diverted = s.vehicles_diverted;
    out->vehicles_pending = s.vehicles_pending;
    out->warnings = s.warnings;
    return PTC_OK;
  });
}

ptc_status ptc_report_summary_json(const ptc_report* report, char* buf, size_t len, size_t* needed) {
  return guarded([&] {
    require(report != nullptr, "null report");
    return copy_text(cosim::summary_json(report->report), buf, len, needed);
  });
}

ptc_status ptc_report_write(const ptc_report* report, const char* dir) {
  return guarded([&] {
    require(report && dir, "null argument");
    cosim::write_report(report->report, dir);
    return PTC_OK;
  });
}

void ptc_report_free(ptc_report* report) { delete report; }

ptc_status ptc_traffic_run(const ptc_config* cfg, const char* net_path, const char* trips_path, const char* out_dir,
                           ptc_traffic_info* info) {
  return guarded([&] {
    require(net_path && trips_path, "null path");
    const auto& c = or_default(cfg);
    c.validate();
    const auto net = netio::load_traffic_network_files(net_path, trips_path).with_capacity_scale(c.capacity_scale);
    const auto dir = out_path(out_dir);
    traffic::AssignmentOptions opt{c.eps_traffic, c.max_iter_traffic, c.golden_tol, c.threads, false};
    const auto r = traffic::solve_sue_interval(net, net.od(), traffic::free_flow_costs(net).times, opt);
    const auto times = traffic::link_costs(net, r.flows).times;
    std::string csv = "link_id,tail,head,flow,time_min\n";
    for (std::size_t a = 0; a < net.link_count(); ++a) {
      const auto& l = net.links()[a];
      csv += std::to_string(l.id) + "," + std::to_string(l.tail) + "," + std::to_string(l.head) + "," + num(r.flows[a]) +
             "," + num(times[a]) + "\n";
    }
    cosim::write_text_atomic(dir / "flows.csv", csv);
    if (c.trace) {
      std::string trace = "iteration,objective\n";
      for (std::size_t k = 0; k < r.objective_trace.size(); ++k)
        trace += std::to_string(k) + "," + num(r.objective_trace[k]) + "\n";
      cosim::write_text_atomic(dir / "traffic_trace.csv", trace);
    }
    if (info) {
      info->links = net.link_count();
      info->iterations = r.iterations;
      info->converged = r.converged;
      info->gap = r.gap;
      info->objective = r.objective;
      info->delay_hours = traffic::total_delay_hours(net, r.flows);
    }
    return not_converged(c, r.converged, "traffic assignment");
  });
}

ptc_status ptc_opf_run(const ptc_config* cfg, const char* feeder_path, const char* out_dir, ptc_opf_info* info) {
  return guarded([&] {
    require(feeder_path != nullptr, "null path");
    const auto& c = or_default(cfg);
    c.validate();
    const auto pn = netio::load_feeder_file(feeder_path);
    const auto dir = out_path(out_dir);
    powerflow::OpfOptions opt;
    opt.alpha1 = c.alpha1;
    opt.beta1 = c.beta1;
    opt.rho = c.rho;
    opt.eps = c.eps_admm;
    opt.max_iter = c.max_iter_admm;
    opt.threads = c.threads;
    std::string trace = "iteration,primal,dual,objective\n";
    if (c.trace)
      opt.trace = [&](int k, double r, double s, double f) {
        trace += std::to_string(k) + "," + num(r) + "," + num(s) + "," + num(f) + "\n";
      };
    const auto sol = powerflow::solve_opf(pn, {}, opt);
    std::string csv = "bus,p,q,v,l,P,Q\n";
    const auto& st = sol.state;
    for (std::size_t i = 0; i < pn.bus_count(); ++i)
      csv += std::to_string(pn.buses()[i].id) + "," + num(st.p[i]) + "," + num(st.q[i]) + "," + num(st.v[i]) + "," +
             num(st.l[i]) + "," + num(st.P[i]) + "," + num(st.Q[i]) + "\n";
    cosim::write_text_atomic(dir / "opf.csv", csv);
    if (c.trace) cosim::write_text_atomic(dir / "opf_trace.csv", trace);
    if (info) {
      info->buses = pn.bus_count();
      info->iterations = sol.iterations;
      info->converged = sol.converged;
      info->objective = sol.objective;
      info->exactness_gap = sol.gap;
      info->primal_residual = sol.primal;
      info->dual_residual = sol.dual;
    }
    return not_converged(c, sol.converged, "OPF");
  });
}

ptc_status ptc_equilibrium_run(const ptc_config* cfg, double q_pds_mw, double q_uts, size_t n_cds, double* injections,
                               ptc_equilibrium_info* info) {
  return guarded([&] {
    const auto& c = or_default(cfg);
    c.validate();
    const auto cm = market::CostModel::from_config(c);
    const auto bounds = market::Bounds::uniform(n_cds, c.price_min, c.price_max, c.cds_p_min, c.cds_p_max);
    const auto st = market::solve_equilibrium(cm, q_pds_mw, q_uts, bounds, {c.gamma2, c.eps_eq, c.max_iter_eq, {}});
    if (injections) std::copy(st.injections.begin(), st.injections.end(), injections);
    if (info) {
      info->price = st.price;
      info->total_injection_mw = 0.0;
      for (double p : st.injections) info->total_injection_mw += p;
      info->utility_cost = market::utility_cost(cm, q_pds_mw, q_uts, st.injections);
      info->price_residual = st.price_residual;
      info->iterations = st.iterations;
      info->converged = st.converged;
    }
    return not_converged(c, st.converged, "equilibrium");
  });
}

ptc_status ptc_schedule_run(const ptc_config* cfg, const char* instance_path, const char* out_dir, ptc_schedule_info* info) {
  return guarded([&] {
    require(instance_path != nullptr, "null path");
    const auto& c = or_default(cfg);
    c.validate();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(instance_path));
      if (j.contains("instances")) j = j.at("instances").at(0);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string(instance_path) + ": " + e.what());
    }
    evdispatch::ScheduleLimits lim;
    std::vector<double> baseline;
    std::vector<evdispatch::Ev> evs;
    try {
      baseline = j.at("baseline").get<std::vector<double>>();
      const auto& l = j.at("limits");
      lim = {l.at("rate_lo").get<double>(), l.at("rate_hi").get<double>(), l.at("soc_lo").get<double>(),
             l.at("soc_hi").get<double>(), l.at("dt").get<double>()};
      for (const auto& e : j.at("evs"))
        evs.push_back({e.at("demand").get<double>(), e.at("soc0").get<double>(), e.at("capacity").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Validation, std::string(instance_path) + ": " + e.what());
    }
    const auto dir = out_path(out_dir);
    const auto s = evdispatch::solve_smart_schedule(baseline, evs, lim);
    const auto stochastic = evdispatch::stochastic_schedule(baseline, evs, lim, c.seed);
    cosim::write_text_atomic(dir / "schedule.csv", evdispatch::schedule_csv(0, s));
    if (info) {
      info->evs = evs.size();
      info->periods = baseline.size();
      info->iterations = s.iterations;
      info->converged = s.converged;
      info->objective = s.objective;
      info->stochastic_objective = evdispatch::flatness_objective(stochastic.netload);
    }
    return not_converged(c, s.converged, "smart schedule");
  });
}

ptc_status ptc_feeder_check(const char* path, size_t* buses, size_t* branches) {
  return guarded([&] {
    require(path != nullptr, "null path");
    const auto pn = netio::load_feeder_file(path);
    if (buses) *buses = pn.bus_count();
    if (branches) *branches = pn.branches().size();
    return PTC_OK;
  });
}

ptc_status ptc_traffic_check(const char* net_path, const char* trips_path, size_t* nodes, size_t* links, size_t* od_pairs) {
  return guarded([&] {
    require(net_path && trips_path, "null path");
    const auto tn = netio::load_traffic_network_files(net_path, trips_path);
    if (nodes) *nodes = tn.node_count();
    if (links) *links = tn.link_count();
    if (od_pairs) *od_pairs = tn.od().size();
    return PTC_OK;
  });
}

}  // extern "C"
