#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ptcosim/ptcosim.h"

namespace {

constexpr const char* kOutDirEnv = "PTCOSIM_OUT_DIR";

struct Flags {
  std::optional<std::string> eps, rho, gamma2, threads, seed;
  bool strict = false;
  bool trace = false;
  std::vector<std::string> sets;
  std::string config;
  std::string out;
};

struct Failure {
  ptc_status status;
};

using ConfigPtr = std::unique_ptr<ptc_config, decltype(&ptc_config_free)>;

void check(ptc_status st) {
  if (st == PTC_OK) return;
  std::fprintf(stderr, "error: %s: %s\n", ptc_status_name(st), ptc_last_error());
  throw Failure{st};
}

// Solver calls still produce outputs when they report non-convergence; the status is deferred to the exit code.
ptc_status solver(ptc_status st) {
  if (st == PTC_ERR_NOT_CONVERGED) {
    std::fprintf(stderr, "error: %s\n", ptc_last_error());
    return st;
  }
  check(st);
  return st;
}

void common_flags(CLI::App* cmd, Flags& f, bool with_eps) {
  if (with_eps) cmd->add_option("--eps", f.eps, "Solver tolerance");
  cmd->add_option("--rho", f.rho, "ADMM penalty");
  cmd->add_option("--gamma2", f.gamma2, "Market step size");
  cmd->add_option("--threads", f.threads, "Worker thread cap");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_flag("--strict", f.strict, "Exit 2 when a solver stops at its iteration cap");
  cmd->add_flag("--trace", f.trace, "Write per-iteration trace files");
  cmd->add_option("--set", f.sets, "Override a config key (key=value), repeatable");
  cmd->add_option("--out", f.out, std::string("Output directory (default $") + kOutDirEnv + " or .)");
}

ConfigPtr make_config(const Flags& f, const std::string& path, const char* eps_key) {
  ptc_config* raw = nullptr;
  check(path.empty() ? ptc_config_new(&raw) : ptc_config_load(path.c_str(), &raw));
  ConfigPtr cfg(raw, ptc_config_free);
  auto set = [&](const char* key, const std::optional<std::string>& v) {
    if (v) check(ptc_config_set(cfg.get(), key, v->c_str()));
  };
  set(eps_key, f.eps);
  set("rho", f.rho);
  set("gamma2", f.gamma2);
  set("threads", f.threads);
  set("seed", f.seed);
  if (f.strict) check(ptc_config_set(cfg.get(), "strict", "true"));
  if (f.trace) check(ptc_config_set(cfg.get(), "trace", "true"));
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{PTC_ERR_INVALID_ARGUMENT};
    }
    check(ptc_config_set(cfg.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  check(ptc_config_validate(cfg.get()));
  return cfg;
}

std::string out_dir(const Flags& f) {
  if (!f.out.empty()) return f.out;
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : ".";
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ptc_status cmd_run(const Flags& f, const std::string& cfg_path) {
  auto cfg = make_config(f, cfg_path, "eps_eq");
  ptc_report* raw = nullptr;
  const auto st = ptc_run_scenario(cfg.get(), &raw);
  if (st != PTC_ERR_NOT_CONVERGED) check(st);
  std::unique_ptr<ptc_report, decltype(&ptc_report_free)> report(raw, ptc_report_free);
  const auto dir = out_dir(f);
  check(ptc_report_write(report.get(), dir.c_str()));
  ptc_summary s{};
  check(ptc_report_summary(report.get(), &s));
  std::printf("intervals: %d\n", s.intervals);
  std::printf("peak netload: %.3f -> %.3f MW\n", s.peak_before_mw, s.peak_after_mw);
  std::printf("valley netload: %.3f -> %.3f MW\n", s.valley_before_mw, s.valley_after_mw);
  std::printf("total delay: %.1f -> %.1f h\n", s.delay_before_h, s.delay_after_h);
  std::printf("social cost: %.1f -> %.1f\n", s.social_cost_before, s.social_cost_after);
  std::printf("EV energy: %.3f MWh, diverted %.1f vehicles, warnings %d\n", s.ev_energy_mwh, s.vehicles_diverted,
              s.warnings);
  std::printf("report: %s\n", dir.c_str());
  if (st == PTC_ERR_NOT_CONVERGED) std::fprintf(stderr, "error: %s\n", ptc_last_error());
  return st;
}

ptc_status cmd_traffic(const Flags& f, const std::string& net, const std::string& trips) {
  auto cfg = make_config(f, f.config, "eps_traffic");
  const auto dir = out_dir(f);
  ptc_traffic_info info{};
  const auto st = solver(ptc_traffic_run(cfg.get(), net.c_str(), trips.c_str(), dir.c_str(), &info));
  std::printf("links: %zu\niterations: %d\nconverged: %s\nrelative gap: %.3e\nbeckmann: %.6f\ndelay: %.3f h\n",
              info.links, info.iterations, info.converged ? "yes" : "no", info.gap, info.objective, info.delay_hours);
  return st;
}

ptc_status cmd_opf(const Flags& f, const std::string& feeder) {
  auto cfg = make_config(f, f.config, "eps_admm");
  const auto dir = out_dir(f);
  ptc_opf_info info{};
  const auto st = solver(ptc_opf_run(cfg.get(), feeder.c_str(), dir.c_str(), &info));
  std::printf("buses: %zu\niterations: %d\nconverged: %s\nobjective: %.9f\nexactness gap: %.3e\n"
              "primal residual: %.3e\ndual residual: %.3e\n",
              info.buses, info.iterations, info.converged ? "yes" : "no", info.objective, info.exactness_gap,
              info.primal_residual, info.dual_residual);
  return st;
}

ptc_status cmd_equilibrium(const Flags& f, double q_pds, double q_uts, std::size_t n_cds) {
  auto cfg = make_config(f, f.config, "eps_eq");
  std::vector<double> p(n_cds);
  ptc_equilibrium_info info{};
  const auto st = solver(ptc_equilibrium_run(cfg.get(), q_pds, q_uts, n_cds, p.data(), &info));
  std::printf("price: %.9f\ntotal injection: %.9f MW\nutility cost: %.6f\nprice residual: %.3e\niterations: %d\n"
              "converged: %s\n",
              info.price, info.total_injection_mw, info.utility_cost, info.price_residual, info.iterations,
              info.converged ? "yes" : "no");
  for (std::size_t i = 0; i < n_cds; ++i) std::printf("injection %zu: %.9f MW\n", i + 1, p[i]);
  return st;
}

ptc_status cmd_schedule(const Flags& f, const std::string& instance) {
  auto cfg = make_config(f, f.config, "eps_eq");
  const auto dir = out_dir(f);
  ptc_schedule_info info{};
  const auto st = solver(ptc_schedule_run(cfg.get(), instance.c_str(), dir.c_str(), &info));
  std::printf("evs: %zu\nperiods: %zu\niterations: %d\nconverged: %s\nflatness: %.9f\nstochastic flatness: %.9f\n",
              info.evs, info.periods, info.iterations, info.converged ? "yes" : "no", info.objective,
              info.stochastic_objective);
  return st;
}

ptc_status cmd_validate(const std::vector<std::string>& files) {
  if (files.size() == 2) {
    std::size_t nodes = 0, links = 0, od = 0;
    check(ptc_traffic_check(files[0].c_str(), files[1].c_str(), &nodes, &links, &od));
    std::printf("ok: %zu nodes, %zu links, %zu od pairs\n", nodes, links, od);
    return PTC_OK;
  }
  if (files.size() != 1) {
    std::fprintf(stderr, "error: validate takes a feeder, a scenario config, or a network and trips pair\n");
    throw Failure{PTC_ERR_INVALID_ARGUMENT};
  }
  const auto& path = files[0];
  if (ends_with(path, ".cfg")) {
    ptc_config* raw = nullptr;
    check(ptc_config_load(path.c_str(), &raw));
    ConfigPtr cfg(raw, ptc_config_free);
    ptc_scenario_info info{};
    check(ptc_scenario_check(cfg.get(), &info));
    std::printf("ok: %zu nodes, %zu links, %zu od pairs, %zu buses, %zu branches, %zu sites\n", info.nodes, info.links,
                info.od_pairs, info.buses, info.branches, info.sites);
    return PTC_OK;
  }
  std::size_t buses = 0, branches = 0;
  check(ptc_feeder_check(path.c_str(), &buses, &branches));
  std::printf("ok: %zu buses, %zu branches\n", buses, branches);
  return PTC_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled power and traffic network co-simulation"};
  app.require_subcommand(1);
  app.footer(
      "Verbs:\n"
      "  run <scenario.cfg>                       coordinated and baseline runs, report into --out\n"
      "  traffic <net.tntp> <trips.tntp>          Frank-Wolfe assignment, writes flows.csv\n"
      "  opf <feeder.txt>                         ADMM relaxed OPF, writes opf.csv\n"
      "  equilibrium --q-pds MW --q-uts N --n-cds K   market price and injections\n"
      "  schedule <instance.json>                 smart charging schedule, writes schedule.csv\n"
      "  validate <file> [trips]                  parse and check a feeder, config or network pair\n"
      "Exit codes: 0 success, 1 invalid input, 2 non-convergence with --strict.");

  Flags f;
  std::string cfg_path, net, trips, feeder, instance;
  double q_pds = 0.0, q_uts = 0.0;
  std::size_t n_cds = 1;
  std::vector<std::string> files;

  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("scenario", cfg_path, "Scenario config")->required()->check(CLI::ExistingFile);
  common_flags(run, f, false);

  auto* traffic = app.add_subcommand("traffic", "Solve one traffic assignment");
  traffic->add_option("net", net, "TNTP network file")->required()->check(CLI::ExistingFile);
  traffic->add_option("trips", trips, "TNTP trips file")->required()->check(CLI::ExistingFile);
  traffic->add_option("--config", f.config, "Config file supplying defaults")->check(CLI::ExistingFile);
  common_flags(traffic, f, true);

  auto* opf = app.add_subcommand("opf", "Solve the relaxed OPF of a feeder");
  opf->add_option("feeder", feeder, "Feeder file")->required()->check(CLI::ExistingFile);
  opf->add_option("--config", f.config, "Config file supplying defaults")->check(CLI::ExistingFile);
  common_flags(opf, f, true);

  auto* eq = app.add_subcommand("equilibrium", "Solve the price/injection equilibrium");
  eq->add_option("--q-pds", q_pds, "Feeder netload, MW")->required();
  eq->add_option("--q-uts", q_uts, "Road load, vehicles")->required();
  eq->add_option("--n-cds", n_cds, "Number of stations")->check(CLI::PositiveNumber);
  eq->add_option("--config", f.config, "Config file supplying defaults")->check(CLI::ExistingFile);
  common_flags(eq, f, true);

  auto* sched = app.add_subcommand("schedule", "Solve one smart charging instance");
  sched->add_option("instance", instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  sched->add_option("--config", f.config, "Config file supplying defaults")->check(CLI::ExistingFile);
  common_flags(sched, f, false);

  auto* validate = app.add_subcommand("validate", "Check input files without solving");
  validate->add_option("files", files, "Feeder, scenario config, or network and trips")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ptc_status st = PTC_OK;
    if (*run) st = cmd_run(f, cfg_path);
    else if (*traffic) st = cmd_traffic(f, net, trips);
    else if (*opf) st = cmd_opf(f, feeder);
    else if (*eq) st = cmd_equilibrium(f, q_pds, q_uts, n_cds);
    else if (*sched) st = cmd_schedule(f, instance);
    else st = cmd_validate(files);
    return st == PTC_ERR_NOT_CONVERGED ? 2 : 0;
  } catch (const Failure& e) {
    return e.status == PTC_ERR_NOT_CONVERGED ? 2 : 1;
  }
}
