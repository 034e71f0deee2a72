#pragma once

#include <vector>

#include "ptcosim/config.hpp"

namespace ptc::market {

struct CostModel {
  Quadratic f_ps;   // utility cost of the feeder netload, MW -> $
  Quadratic f_uts;  // utility cost of road load, vehicles -> $
  Quadratic f_wt;   // customer waiting cost, vehicle-hours -> $
  double gamma1 = 1.0;
  double gamma1_max = 10.0;
  double tau1 = 0.25;  // hours
  double c1 = 1.0;     // MW per vehicle

  void validate() const;
  static CostModel from_config(const ScenarioConfig& cfg);
};

struct Bounds {
  double price_lo = 0.0;
  double price_hi = 1e3;
  std::vector<double> p_lo;  // per CDS
  std::vector<double> p_hi;

  static Bounds uniform(std::size_t n, double price_lo, double price_hi, double p_lo, double p_hi);
};

struct EquilibriumState {
  double price = 0.0;
  std::vector<double> injections;  // P per CDS, MW (discharge positive)
  int iterations = 0;
  bool converged = false;
  double step = 0.0;                   // final gamma2 after any halving
  double price_residual = 0.0;         // |price - price_formula(injections)| before clamping
  std::vector<double> utility_trace;   // utility_cost after each iteration
};

double utility_cost(const CostModel& cm, double q_pds, double q_uts, const std::vector<double>& p);
double customer_cost(const CostModel& cm, double price, double p_i);
double price_formula(const CostModel& cm, double q_pds, double q_uts, const std::vector<double>& p);
// Derivative of a customer's cost in its own injection, at total injection p_total.
double customer_gradient(const CostModel& cm, double price, double p_total);

struct SolveOptions {
  double gamma2 = 0.05;
  double eps = 1e-6;
  int max_iter = 10000;
  std::vector<double> start;  // initial injections; clamped zeros when empty
};

EquilibriumState solve_equilibrium(const CostModel& cm, double q_pds, double q_uts, const Bounds& bounds,
                                   const SolveOptions& opt);

}  // namespace ptc::market
