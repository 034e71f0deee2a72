#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ptcosim/error.hpp"
#include "ptcosim/market.hpp"

using namespace ptc;
using namespace ptc::market;

namespace {

// f_PS = Q^2/2, f_WT = x^2/2, gamma1 = 0, tau1 = C1 = 1.
CostModel analytic_model() {
  CostModel cm;
  cm.f_ps = {0.5, 0.0, 0.0};
  cm.f_uts = {0.0, 0.0, 0.0};
  cm.f_wt = {0.5, 0.0, 0.0};
  cm.gamma1 = 0.0;
  cm.tau1 = 1.0;
  cm.c1 = 1.0;
  return cm;
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

struct Instance {
  CostModel cm;
  double q_pds, q_uts;
  Bounds bounds;
};

Instance random_instance(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  in.cm.f_ps = {0.01 + u(rng), 10 * u(rng), u(rng)};
  in.cm.f_uts = {0.01 * u(rng), u(rng), 0.0};
  in.cm.f_wt = {0.01 + u(rng), u(rng), 0.0};
  in.cm.gamma1 = 2 * u(rng);
  in.cm.tau1 = 0.1 + u(rng);
  in.cm.c1 = 0.5 + 2 * u(rng);
  in.q_pds = 5 + 20 * u(rng);
  in.q_uts = 50 * u(rng);
  const std::size_t n = 1 + static_cast<std::size_t>(5 * u(rng));
  in.bounds.price_lo = -1e6;
  in.bounds.price_hi = 1e6;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = -3 * u(rng);
    in.bounds.p_lo.push_back(lo);
    in.bounds.p_hi.push_back(lo + 0.1 + 4 * u(rng));
  }
  return in;
}

// Equilibrium total injection by bisection on the common customer gradient,
// which is strictly increasing in the total.
double oracle_total(const Instance& in) {
  auto g = [&](double s) {
    double price = in.cm.f_ps.derivative(in.q_pds - s) + in.cm.gamma1 / in.cm.c1 * in.cm.f_uts.derivative(in.q_uts - s / in.cm.c1);
    return in.cm.tau1 / in.cm.c1 * in.cm.f_wt.derivative(in.cm.tau1 * s / in.cm.c1) - price;
  };
  double lo = total(in.bounds.p_lo), hi = total(in.bounds.p_hi);
  if (g(lo) >= 0) return lo;
  if (g(hi) <= 0) return hi;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(UtilityCost, Examples) {
  auto cm = analytic_model();
  EXPECT_DOUBLE_EQ(utility_cost(cm, 10, 0, {4.0}), 18.0 + 8.0);  // f_WT(4) = 8 on top of 18
  cm.f_wt = {0, 0, 0};
  EXPECT_DOUBLE_EQ(utility_cost(cm, 10, 0, {4.0}), 18.0);
  EXPECT_DOUBLE_EQ(utility_cost(cm, 10, 0, {1.5, 2.5}), 18.0);

  CostModel base;
  base.f_ps = {0.3, 2.0, 0.0};
  base.f_uts = {0.1, 1.0, 0.0};
  base.gamma1 = 1.5;
  EXPECT_DOUBLE_EQ(utility_cost(base, 7, 11, {0.0}), base.f_ps(7) + 1.5 * base.f_uts(11));
}

TEST(UtilityCost, ConvexInInjections) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    auto in = random_instance(rng);
    std::vector<double> a(in.bounds.p_lo.size()), b(a.size()), m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
      m[i] = 0.5 * (a[i] + b[i]);
    }
    double fa = utility_cost(in.cm, in.q_pds, in.q_uts, a), fb = utility_cost(in.cm, in.q_pds, in.q_uts, b);
    EXPECT_LE(utility_cost(in.cm, in.q_pds, in.q_uts, m), 0.5 * (fa + fb) + 1e-9 * (1 + std::abs(fa + fb)));
  }
}

TEST(CustomerCost, Examples) {
  auto cm = analytic_model();
  cm.f_wt = {0.5, 0.0, 3.0};
  EXPECT_DOUBLE_EQ(customer_cost(cm, 0, 0), cm.f_wt(0));
  cm.f_wt = {0.5, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(customer_cost(cm, 5, 5), -12.5);
  EXPECT_LT(customer_cost(cm, 6, 2), customer_cost(cm, 5, 2));
}

TEST(PriceFormula, Examples) {
  auto cm = analytic_model();
  EXPECT_DOUBLE_EQ(price_formula(cm, 10, 0, {5.0}), 5.0);
  // Fully flattened netloads with b = 0 price at zero.
  cm.gamma1 = 1.0;
  cm.c1 = 2.0;
  cm.f_uts = {0.7, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(price_formula(cm, 6, 3, {6.0}), 0.0);
  // Doubling gamma1 doubles the road term.
  double road = price_formula(cm, 6, 10, {6.0});
  cm.gamma1 = 2.0;
  EXPECT_DOUBLE_EQ(price_formula(cm, 6, 10, {6.0}), 2 * road);
}

TEST(Equilibrium, AnalyticFixedPoint) {
  auto cm = analytic_model();
  auto st = solve_equilibrium(cm, 10, 0, Bounds::uniform(1, -1e6, 1e6, -1e6, 1e6), {});
  ASSERT_TRUE(st.converged);
  EXPECT_NEAR(st.price, 5.0, 1e-5);
  EXPECT_NEAR(st.injections[0], 5.0, 1e-5);
}

TEST(Equilibrium, NoDischargeAllowed) {
  CostModel cm;
  cm.f_ps = {0.2, 3.0, 0.0};
  cm.f_uts = {0.05, 0.5, 0.0};
  cm.f_wt = {0.1, 0.2, 0.0};
  cm.gamma1 = 1.0;
  cm.c1 = 0.5;
  auto st = solve_equilibrium(cm, 12, 30, Bounds::uniform(3, 0, 1e6, -2.0, 0.0), {});
  ASSERT_TRUE(st.converged);
  for (double p : st.injections) EXPECT_EQ(p, 0.0);
  EXPECT_DOUBLE_EQ(st.price, cm.f_ps.derivative(12) + cm.gamma1 / cm.c1 * cm.f_uts.derivative(30));
}

TEST(Equilibrium, SymmetricSitesAgree) {
  auto cm = analytic_model();
  auto st = solve_equilibrium(cm, 10, 0, Bounds::uniform(2, -1e6, 1e6, -10, 10), {});
  ASSERT_TRUE(st.converged);
  EXPECT_EQ(st.injections[0], st.injections[1]);
  // The waiting cost sees the aggregate: S = pi and pi = 10 - S.
  EXPECT_NEAR(st.price, 5.0, 1e-5);
  EXPECT_NEAR(st.injections[0], 2.5, 1e-5);
}

TEST(Equilibrium, RandomInstancesResidualAndOracle) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    auto in = random_instance(rng);
    auto st = solve_equilibrium(in.cm, in.q_pds, in.q_uts, in.bounds, {});
    ASSERT_TRUE(st.converged) << "trial " << trial;
    EXPECT_LE(std::abs(st.price - price_formula(in.cm, in.q_pds, in.q_uts, st.injections)), 1e-5);
    EXPECT_NEAR(total(st.injections), oracle_total(in), 1e-4 * (1 + std::abs(oracle_total(in)))) << "trial " << trial;
    for (std::size_t i = 0; i < st.injections.size(); ++i) {
      EXPECT_GE(st.injections[i], in.bounds.p_lo[i]);
      EXPECT_LE(st.injections[i], in.bounds.p_hi[i]);
    }
  }
}

TEST(Equilibrium, ProjectionIdempotentAtEquilibrium) {
  auto cm = analytic_model();
  auto bounds = Bounds::uniform(1, -1e6, 1e6, 0, 3);
  auto st = solve_equilibrium(cm, 10, 0, bounds, {});
  SolveOptions again;
  again.start = st.injections;
  auto st2 = solve_equilibrium(cm, 10, 0, bounds, again);
  EXPECT_EQ(st2.iterations, 1);
  EXPECT_EQ(st2.injections, st.injections);
}

TEST(Equilibrium, SocialCostDescends) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng);
    SolveOptions opt;
    opt.gamma2 = 0.01;
    auto st = solve_equilibrium(in.cm, in.q_pds, in.q_uts, in.bounds, opt);
    for (std::size_t k = 2; k < st.utility_trace.size(); ++k)
      EXPECT_LE(st.utility_trace[k], st.utility_trace[k - 1] + 1e-9 * (1 + std::abs(st.utility_trace[k - 1])));
  }
}

TEST(Equilibrium, PriceMonotoneInNetload) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_instance(rng);
    double prev = -1e300;
    for (double q = 0; q <= 40; q += 2.5) {
      auto st = solve_equilibrium(in.cm, q, in.q_uts, in.bounds, {});
      EXPECT_GE(st.price, prev - 1e-6);
      prev = st.price;
    }
  }
}

TEST(Equilibrium, OscillationHalvesStep) {
  auto cm = analytic_model();
  SolveOptions opt;
  opt.gamma2 = 1.5;  // contraction factor |1 - 2 gamma2| = 2 without the safeguard
  auto st = solve_equilibrium(cm, 10, 0, Bounds::uniform(1, -1e6, 1e6, -1e6, 1e6), opt);
  EXPECT_TRUE(st.converged);
  EXPECT_LT(st.step, 1.0);
  EXPECT_NEAR(st.injections[0], 5.0, 1e-5);
}

TEST(Equilibrium, RejectsBadModel) {
  auto cm = analytic_model();
  cm.gamma1 = 20;
  EXPECT_THROW(solve_equilibrium(cm, 10, 0, Bounds::uniform(1, 0, 1, 0, 1), {}), Error);
  cm.gamma1 = 0;
  EXPECT_THROW(solve_equilibrium(cm, 10, 0, Bounds::uniform(1, 0, 1, 2, 1), {}), Error);
}
