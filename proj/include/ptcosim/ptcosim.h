#ifndef PTCOSIM_H
#define PTCOSIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(PTC_BUILDING_LIBRARY)
#define PTC_API __attribute__((visibility("default")))
#else
#define PTC_API
#endif

typedef enum ptc_status {
  PTC_OK = 0,
  PTC_ERR_PARSE = 1,
  PTC_ERR_VALIDATION = 2,
  PTC_ERR_IO = 3,
  PTC_ERR_NOT_CONVERGED = 4,
  PTC_ERR_INVALID_ARGUMENT = 5,
  PTC_ERR_INFEASIBLE = 6,
  PTC_ERR_INTERNAL = 7
} ptc_status;

typedef struct ptc_config ptc_config;
typedef struct ptc_report ptc_report;

/* Message of the last failed call on the calling thread; empty after a success. */
PTC_API const char* ptc_last_error(void);
PTC_API const char* ptc_status_name(ptc_status status);

/* Configuration. Keys and values use the text form of the config file. */
PTC_API ptc_status ptc_config_new(ptc_config** out);
PTC_API ptc_status ptc_config_load(const char* path, ptc_config** out);
PTC_API ptc_status ptc_config_set(ptc_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator when it fits; `needed` receives the length including the terminator. */
PTC_API ptc_status ptc_config_get(const ptc_config* cfg, const char* key, char* buf, size_t len, size_t* needed);
PTC_API ptc_status ptc_config_validate(const ptc_config* cfg);
PTC_API void ptc_config_free(ptc_config* cfg);

/* Every solver entry point below returns PTC_ERR_NOT_CONVERGED when the config has `strict = true`
   and a solver stopped at its iteration cap; outputs are still produced in that case. */

typedef struct ptc_scenario_info {
  size_t nodes, links, od_pairs;
  size_t buses, branches;
  size_t sites;
} ptc_scenario_info;

/* Loads and couples the networks named by the config without solving anything. */
PTC_API ptc_status ptc_scenario_check(const ptc_config* cfg, ptc_scenario_info* info);

typedef struct ptc_summary {
  int intervals;
  double peak_before_mw, peak_after_mw;
  double valley_before_mw, valley_after_mw;
  double delay_before_h, delay_after_h;
  double social_cost_before, social_cost_after;
  double ev_energy_mwh;
  double vehicles_diverted, vehicles_pending;
  int warnings;
} ptc_summary;

/* Runs the uncoordinated baseline and the configured run over the config's profiles. */
PTC_API ptc_status ptc_run_scenario(const ptc_config* cfg, ptc_report** out);
PTC_API ptc_status ptc_report_summary(const ptc_report* report, ptc_summary* out);
PTC_API ptc_status ptc_report_summary_json(const ptc_report* report, char* buf, size_t len, size_t* needed);
/* Writes summary.json, timings.json and the per-series CSV files into `dir`, creating it. */
PTC_API ptc_status ptc_report_write(const ptc_report* report, const char* dir);
PTC_API void ptc_report_free(ptc_report* report);

typedef struct ptc_traffic_info {
  size_t links;
  int iterations;
  int converged;
  double gap;
  double objective;
  double delay_hours;
} ptc_traffic_info;

/* Frank-Wolfe assignment of the trips file on the network file (capacities times capacity_scale).
   Writes flows.csv into `out_dir`, plus traffic_trace.csv when `trace = true`. `cfg` may be NULL. */
PTC_API ptc_status ptc_traffic_run(const ptc_config* cfg, const char* net_path, const char* trips_path,
                                   const char* out_dir, ptc_traffic_info* info);

typedef struct ptc_opf_info {
  size_t buses;
  int iterations;
  int converged;
  double objective;
  double exactness_gap;
  double primal_residual;
  double dual_residual;
} ptc_opf_info;

/* Relaxed OPF on the feeder file. Writes opf.csv into `out_dir`, plus opf_trace.csv when `trace = true`. */
PTC_API ptc_status ptc_opf_run(const ptc_config* cfg, const char* feeder_path, const char* out_dir, ptc_opf_info* info);

typedef struct ptc_equilibrium_info {
  double price;
  double total_injection_mw;
  double utility_cost;
  double price_residual;
  int iterations;
  int converged;
} ptc_equilibrium_info;

/* Price/injection equilibrium for `n_cds` stations with the config's bounds. `injections` (length n_cds) may be NULL. */
PTC_API ptc_status ptc_equilibrium_run(const ptc_config* cfg, double q_pds_mw, double q_uts, size_t n_cds,
                                       double* injections, ptc_equilibrium_info* info);

typedef struct ptc_schedule_info {
  size_t evs;
  size_t periods;
  int iterations;
  int converged;
  double objective;
  double stochastic_objective;
} ptc_schedule_info;

/* Smart charging schedule for a JSON instance {"baseline": [...], "limits": {...}, "evs": [...]}
   (or the first entry of {"instances": [...]}). Writes schedule.csv into `out_dir`. */
PTC_API ptc_status ptc_schedule_run(const ptc_config* cfg, const char* instance_path, const char* out_dir,
                                    ptc_schedule_info* info);

PTC_API ptc_status ptc_feeder_check(const char* path, size_t* buses, size_t* branches);
PTC_API ptc_status ptc_traffic_check(const char* net_path, const char* trips_path, size_t* nodes, size_t* links,
                                     size_t* od_pairs);

#ifdef __cplusplus
}
#endif

#endif
