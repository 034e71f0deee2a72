#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ptcosim/error.hpp"
#include "ptcosim/traffic.hpp"

using namespace ptc;
using namespace ptc::traffic;
using netio::Link;
using netio::OdDemand;
using netio::TrafficNetwork;

namespace {

const std::string kRepo = PTC_REPO_DATA;

TrafficNetwork parallel_links(double f1, double f2, double demand) {
  std::vector<Link> links = {{1, 1, 2, f1, 100.0}, {2, 1, 2, f2, 100.0}};
  return TrafficNetwork({1, 2}, links, {{1, 2, demand}});
}

TrafficNetwork sioux_falls() {
  return netio::load_traffic_network_files(kRepo + "/siouxfalls/SiouxFalls_net.tntp",
                                           kRepo + "/siouxfalls/table1_trips.tntp");
}

AssignmentResult solve(const TrafficNetwork& net, AssignmentOptions opt = {}) {
  return solve_sue_interval(net, net.od(), free_flow_costs(net).times, opt);
}

}  // namespace

TEST(Bpr, Values) {
  EXPECT_DOUBLE_EQ(bpr_time(10, 100, 0), 10.0);
  EXPECT_DOUBLE_EQ(bpr_time(10, 100, 100), 11.5);
  EXPECT_DOUBLE_EQ(bpr_time(10, 100, 50), 10.09375);
  EXPECT_THROW(bpr_time(10, 100, -1), Error);
}

TEST(Bpr, StrictlyIncreasing) {
  double prev = bpr_time(7, 250, 0);
  for (double x = 1; x < 1000; x += 3.7) {
    double t = bpr_time(7, 250, x);
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(Beckmann, ClosedForm) {
  TrafficNetwork net({1, 2}, {{1, 1, 2, 10.0, 100.0}}, {});
  EXPECT_DOUBLE_EQ(beckmann_objective(net, {0.0}), 0.0);
  EXPECT_DOUBLE_EQ(beckmann_objective(net, {100.0}), 1030.0);
}

TEST(Beckmann, ConvexityAgainstGradient) {
  auto net = sioux_falls().with_capacity_scale(0.1);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 3000.0), du(-500.0, 500.0);
  for (int trial = 0; trial < 100; ++trial) {
    LinkFlow x(net.link_count()), y(net.link_count());
    for (std::size_t a = 0; a < x.size(); ++a) {
      x[a] = u(rng);
      y[a] = std::max(0.0, x[a] + du(rng));
    }
    // Gradient of the Beckmann function is the link time vector.
    auto grad = link_costs(net, x).times;
    double lin = beckmann_objective(net, x);
    for (std::size_t a = 0; a < x.size(); ++a) lin += grad[a] * (y[a] - x[a]);
    EXPECT_GE(beckmann_objective(net, y), lin - 1e-9 * std::abs(lin));
  }
}

TEST(AllOrNothing, ParallelLinksPickCheaper) {
  auto net = parallel_links(10, 10, 100);
  auto flow = all_or_nothing(net, {1.0, 2.0}, net.od());
  EXPECT_EQ(flow, (LinkFlow{100.0, 0.0}));
  // Exact tie goes to the lower link id.
  flow = all_or_nothing(net, {2.0, 2.0}, net.od());
  EXPECT_EQ(flow, (LinkFlow{100.0, 0.0}));
}

TEST(AllOrNothing, SingleLinkForced) {
  TrafficNetwork net({1, 2}, {{1, 1, 2, 10.0, 100.0}}, {{1, 2, 50.0}});
  EXPECT_EQ(all_or_nothing(net, {10.0}, net.od()), (LinkFlow{50.0}));
}

TEST(AllOrNothing, SiouxFallsMatchesIndependentShortestPath) {
  auto net = sioux_falls();
  std::vector<OdDemand> od = {{1, 20, 300.0}};
  auto times = free_flow_costs(net).times;
  auto flow = all_or_nothing(net, times, od);
  double cost = 0.0, loaded = 0.0;
  for (std::size_t a = 0; a < flow.size(); ++a) {
    if (flow[a] > 0) {
      EXPECT_DOUBLE_EQ(flow[a], 300.0);
      cost += times[a];
      loaded += 1;
    }
  }
  // Distance 1 -> 20 from a networkx Dijkstra run on the same file.
  EXPECT_DOUBLE_EQ(cost, 22.0);
  EXPECT_EQ(shortest_paths(net, times, 3).dist[net.node_index(14)], 14.0);
  EXPECT_EQ(shortest_paths(net, times, 10).dist[net.node_index(23)], 13.0);
}

TEST(AllOrNothing, UnreachableDestination) {
  TrafficNetwork net({1, 2, 3}, {{1, 1, 2, 1.0, 10.0}}, {{1, 3, 5.0}});
  try {
    all_or_nothing(net, {1.0}, net.od());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unreachable destination for OD pair 1->3"), std::string::npos);
  }
}

TEST(GoldenSection, AnalyticMinimiser) {
  EXPECT_NEAR(golden_section([](double z) { return (z - 0.3) * (z - 0.3); }, 1e-6), 0.3, 1e-6);
  EXPECT_NEAR(golden_section([](double z) { return z; }, 1e-6), 0.0, 1e-6);
  EXPECT_NEAR(golden_section([](double z) { return -z; }, 1e-6), 1.0, 1e-6);
}

TEST(GoldenSection, BeckmannLineMatchesGridScan) {
  auto net = parallel_links(10, 12, 150);
  LinkFlow theta = {150.0, 0.0}, target = {0.0, 150.0};
  auto phi = [&](double z) {
    return beckmann_objective(net, {theta[0] + z * (target[0] - theta[0]), theta[1] + z * (target[1] - theta[1])});
  };
  double best = 0.0, best_val = phi(0.0);
  for (int i = 1; i <= 10000; ++i) {
    double z = i * 1e-4;
    if (phi(z) < best_val) best_val = phi(z), best = z;
  }
  EXPECT_NEAR(golden_section(phi, 1e-6), best, 1e-4);
  EXPECT_NEAR(best, 0.2787, 1e-12);  // frozen from a numpy grid scan of the same function
}

TEST(Assignment, SymmetricSplit) {
  auto r = solve(parallel_links(10, 10, 100));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.flows[0], 50.0, 1e-3);
  EXPECT_NEAR(r.flows[1], 50.0, 1e-3);
}

TEST(Assignment, TimeEqualisationOracle) {
  auto net = parallel_links(10, 12, 150);
  auto r = solve(net);
  ASSERT_TRUE(r.converged);
  // Oracle: bisection on 10(1+.15(x/100)^4) = 12(1+.15((150-x)/100)^4).
  double lo = 0, hi = 150;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (bpr_time(10, 100, mid) < bpr_time(12, 100, 150 - mid) ? lo : hi) = mid;
  }
  EXPECT_NEAR(r.flows[0], lo, 1e-3);
  EXPECT_NEAR(r.flows[0], 108.18842157100993, 1e-3);  // scipy brentq
  EXPECT_NEAR(r.flows[1], 41.811578428990074, 1e-3);
  auto times = link_costs(net, r.flows).times;
  EXPECT_NEAR(times[0], times[1], 1e-3);
  ASSERT_EQ(r.od_times.size(), 1u);
  EXPECT_NEAR(r.od_times[0], 12.055012167512489, 1e-4);
}

TEST(Assignment, SiouxFallsWardrop) {
  auto net = sioux_falls();
  AssignmentOptions opt;
  opt.track_od_flows = true;
  auto r = solve(net, opt);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.gap, 1e-4);
  EXPECT_LE(r.iterations, 500);
  auto w = wardrop_check(net, net.od(), r, 1e-9);
  EXPECT_GE(w.paths_checked, net.od().size());
  EXPECT_LE(w.worst_ratio, 1e-3);
  for (double t : r.od_times) EXPECT_GT(t, 0.0);
}

TEST(AssignmentProperties, ConservationObjectiveDescentAndDeterminism) {
  auto net = sioux_falls().with_capacity_scale(0.1);
  AssignmentOptions opt;
  auto r1 = solve(net, opt);
  EXPECT_TRUE(r1.converged);

  for (std::size_t i = 1; i < r1.objective_trace.size(); ++i)
    EXPECT_LE(r1.objective_trace[i], r1.objective_trace[i - 1] * (1 + 1e-12)) << "iteration " << i;

  std::vector<double> net_out(net.node_count(), 0.0), expected(net.node_count(), 0.0);
  for (std::size_t a = 0; a < net.link_count(); ++a) {
    net_out[net.node_index(net.links()[a].tail)] += r1.flows[a];
    net_out[net.node_index(net.links()[a].head)] -= r1.flows[a];
  }
  for (const auto& d : net.od()) {
    expected[net.node_index(d.origin)] += d.vehicles;
    expected[net.node_index(d.destination)] -= d.vehicles;
  }
  for (std::size_t n = 0; n < net.node_count(); ++n) EXPECT_NEAR(net_out[n], expected[n], 1e-6);
  for (double f : r1.flows) EXPECT_GE(f, 0.0);

  opt.threads = 4;
  auto r4 = solve(net, opt);
  EXPECT_EQ(r1.flows, r4.flows);
  EXPECT_EQ(r1.iterations, r4.iterations);
}

TEST(AssignmentProperties, FixedPoint) {
  auto net = sioux_falls().with_capacity_scale(0.25);
  auto r = solve(net);
  ASSERT_TRUE(r.converged);
  auto next = frank_wolfe_step(net, net.od(), r.flows, 1e-6);
  double sq = 0, mass = 0;
  for (std::size_t a = 0; a < next.size(); ++a) {
    sq += (next[a] - r.flows[a]) * (next[a] - r.flows[a]);
    mass += r.flows[a];
  }
  EXPECT_LE(std::sqrt(sq) / mass, 10 * 1e-4);
}

TEST(Delay, Values) {
  TrafficNetwork net({1, 2}, {{1, 1, 2, 10.0, 100.0}}, {});
  EXPECT_DOUBLE_EQ(total_delay_hours(net, {0.0}), 0.0);
  EXPECT_DOUBLE_EQ(total_delay_hours(net, {100.0}), 2.5);
}

TEST(Delay, DecreasesWhenCapacityGrows) {
  auto base = sioux_falls().with_capacity_scale(0.1);
  double prev = 1e300;
  for (double scale : {1.0, 1.1, 1.25, 1.5, 2.0}) {
    auto net = base.with_capacity_scale(scale);
    auto r = solve(net);
    double delay = total_delay_hours(net, r.flows);
    EXPECT_GT(delay, 0.0);
    EXPECT_LT(delay, prev) << "scale " << scale;
    prev = delay;
  }
}

TEST(Assignment, WarmStartReachesSameEquilibrium) {
  auto net = sioux_falls().with_capacity_scale(0.25);
  AssignmentOptions opt;
  opt.eps = 1e-6;
  opt.max_iter = 20000;
  auto cold = solve(net, opt);
  auto warm = solve_sue_interval(net, net.od(), link_costs(net, cold.flows).times, opt);
  EXPECT_NEAR(warm.objective, cold.objective, 1e-5 * cold.objective);
}

TEST(Assignment, ZeroDemand) {
  auto net = parallel_links(10, 12, 0);
  auto r = solve(net);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.flows, (LinkFlow{0.0, 0.0}));
}
