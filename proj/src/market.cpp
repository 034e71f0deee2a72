#include "ptcosim/market.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptcosim/error.hpp"

namespace ptc::market {
namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

void CostModel::validate() const {
  if (f_ps.a < 0 || f_uts.a < 0 || f_wt.a < 0) fail(ErrorKind::Validation, "cost quadratics must have a >= 0");
  if (!(c1 > 0)) fail(ErrorKind::Validation, "average rate C1 must be > 0");
  if (gamma1 < 0 || gamma1 > gamma1_max) fail(ErrorKind::Validation, "gamma1 outside [0, gamma1_max]");
  if (tau1 < 0) fail(ErrorKind::Validation, "tau1 must be >= 0");
}

CostModel CostModel::from_config(const ScenarioConfig& cfg) {
  CostModel cm;
  cm.f_ps = cfg.f_ps;
  cm.f_uts = cfg.f_uts;
  cm.f_wt = cfg.f_wt;
  cm.gamma1 = cfg.gamma1;
  cm.gamma1_max = cfg.gamma1_max;
  cm.tau1 = cfg.tau1_hours;
  cm.c1 = cfg.avg_rate;
  return cm;
}

Bounds Bounds::uniform(std::size_t n, double price_lo, double price_hi, double p_lo, double p_hi) {
  Bounds b;
  b.price_lo = price_lo;
  b.price_hi = price_hi;
  b.p_lo.assign(n, p_lo);
  b.p_hi.assign(n, p_hi);
  return b;
}

double utility_cost(const CostModel& cm, double q_pds, double q_uts, const std::vector<double>& p) {
  const double total = sum(p);
  const double vehicles = total / cm.c1;
  return cm.f_ps(q_pds - total) + cm.gamma1 * cm.f_uts(q_uts - vehicles) + cm.f_wt(cm.tau1 * vehicles);
}

double customer_cost(const CostModel& cm, double price, double p_i) {
  return cm.f_wt(cm.tau1 * p_i / cm.c1) - price * p_i;
}

double price_formula(const CostModel& cm, double q_pds, double q_uts, const std::vector<double>& p) {
  const double total = sum(p);
  return cm.f_ps.derivative(q_pds - total) + (cm.gamma1 / cm.c1) * cm.f_uts.derivative(q_uts - total / cm.c1);
}

double customer_gradient(const CostModel& cm, double price, double p_total) {
  return (cm.tau1 / cm.c1) * cm.f_wt.derivative(cm.tau1 * p_total / cm.c1) - price;
}

EquilibriumState solve_equilibrium(const CostModel& cm, double q_pds, double q_uts, const Bounds& bounds,
                                   const SolveOptions& opt) {
  cm.validate();
  const std::size_t n = bounds.p_lo.size();
  if (bounds.p_hi.size() != n) fail(ErrorKind::InvalidArgument, "injection bound vectors differ in length");
  if (!(bounds.price_lo <= bounds.price_hi)) fail(ErrorKind::Validation, "empty price interval");
  for (std::size_t i = 0; i < n; ++i)
    if (!(bounds.p_lo[i] <= bounds.p_hi[i])) fail(ErrorKind::Validation, "empty injection interval at CDS " + std::to_string(i));
  if (!(opt.gamma2 > 0)) fail(ErrorKind::InvalidArgument, "gamma2 must be > 0");
  if (!opt.start.empty() && opt.start.size() != n) fail(ErrorKind::InvalidArgument, "start vector length mismatch");

  auto clamp_price = [&](double v) { return std::clamp(v, bounds.price_lo, bounds.price_hi); };

  EquilibriumState st;
  st.injections.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    st.injections[i] = std::clamp(opt.start.empty() ? 0.0 : opt.start[i], bounds.p_lo[i], bounds.p_hi[i]);
  double gamma2 = opt.gamma2;
  double price = clamp_price(price_formula(cm, q_pds, q_uts, st.injections));
  int last_sign = 0;
  int flips = 0;
  std::vector<double> next(n);

  for (int k = 1; k <= opt.max_iter; ++k) {
    const double g = customer_gradient(cm, price, sum(st.injections));
    double dp_max = 0.0;
    double dp_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = std::clamp(st.injections[i] - gamma2 * g, bounds.p_lo[i], bounds.p_hi[i]);
      dp_max = std::max(dp_max, std::abs(next[i] - st.injections[i]));
      dp_sum += next[i] - st.injections[i];
    }
    if (!std::isfinite(dp_sum)) fail(ErrorKind::Divergence, "equilibrium iteration diverged at k=" + std::to_string(k));
    const int sign = dp_sum > 0 ? 1 : (dp_sum < 0 ? -1 : 0);
    flips = (sign != 0 && last_sign != 0 && sign != last_sign) ? flips + 1 : 0;
    if (sign != 0) last_sign = sign;
    if (flips >= 3) {
      gamma2 *= 0.5;
      flips = 0;
    }
    st.injections.swap(next);
    const double next_price = clamp_price(price_formula(cm, q_pds, q_uts, st.injections));
    const double dprice = std::abs(next_price - price);
    price = next_price;
    st.utility_trace.push_back(utility_cost(cm, q_pds, q_uts, st.injections));
    st.iterations = k;
    if (std::max(dprice, dp_max) <= opt.eps) {
      st.converged = true;
      break;
    }
  }
  if (n == 0) st.converged = true;
  const double raw = price_formula(cm, q_pds, q_uts, st.injections);
  st.price = clamp_price(raw);
  st.price_residual = std::abs(st.price - raw);
  st.step = gamma2;
  return st;
}

}  // namespace ptc::market
