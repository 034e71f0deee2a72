#pragma once

#include <functional>
#include <vector>

#include "ptcosim/netio.hpp"

namespace ptc::traffic {

using LinkFlow = std::vector<double>;  // vehicles per interval, link order of the network

struct LinkCost {
  std::vector<double> times;  // minutes
  std::vector<double> base;   // free-flow times the BPR curve is anchored on
};

// f0 * (1 + 0.15 (theta / C)^4)
double bpr_time(double f0, double capacity, double theta);
// Integral of bpr_time from 0 to theta.
double bpr_integral(double f0, double capacity, double theta);

double beckmann_objective(const netio::TrafficNetwork& net, const LinkFlow& theta);
LinkCost link_costs(const netio::TrafficNetwork& net, const LinkFlow& theta);
LinkCost free_flow_costs(const netio::TrafficNetwork& net);

// Single-source shortest paths with non-negative link costs. Ties between
// equal-cost labels go to the lower predecessor link id.
struct ShortestPathTree {
  std::vector<double> dist;          // by node index
  std::vector<std::size_t> pred;     // predecessor link index, npos at the root / unreachable
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};
ShortestPathTree shortest_paths(const netio::TrafficNetwork& net, const std::vector<double>& times, int origin);
// Links of the tree path to `destination`, origin first.
std::vector<std::size_t> tree_path(const netio::TrafficNetwork& net, const ShortestPathTree& tree, int destination);

// Loads each OD demand on its current shortest path.
LinkFlow all_or_nothing(const netio::TrafficNetwork& net, const std::vector<double>& times,
                        const std::vector<netio::OdDemand>& od, int threads = 1);

// Minimiser of a unimodal function on [0, 1] by golden-ratio interval reduction.
double golden_section(const std::function<double(double)>& phi, double tol);

struct AssignmentOptions {
  double eps = 1e-4;
  int max_iter = 500;
  double golden_tol = 1e-6;
  int threads = 1;
  bool track_od_flows = false;
};

struct AssignmentResult {
  LinkFlow flows;
  int iterations = 0;
  double gap = 0.0;
  bool converged = false;
  std::vector<double> od_times;        // equilibrium shortest time per OD entry, minutes
  double objective = 0.0;              // Beckmann value at `flows`
  std::vector<double> objective_trace; // one entry per iteration, starting with the initial loading
  std::vector<LinkFlow> od_flows;      // per OD entry, only with track_od_flows
};

// Frank-Wolfe user equilibrium for one interval. `initial_times` seeds the
// first all-or-nothing loading (the previous interval's times, or free flow).
AssignmentResult solve_sue_interval(const netio::TrafficNetwork& net, const std::vector<netio::OdDemand>& od,
                                    const std::vector<double>& initial_times, const AssignmentOptions& opt);

// One Frank-Wolfe step from `theta`: direction, line search, convex combination.
LinkFlow frank_wolfe_step(const netio::TrafficNetwork& net, const std::vector<netio::OdDemand>& od,
                          const LinkFlow& theta, double golden_tol, int threads = 1);

// Sum of theta * (f(theta) - f0), in hours.
double total_delay_hours(const netio::TrafficNetwork& net, const LinkFlow& theta);

struct WardropReport {
  double max_excess = 0.0;   // worst (used path time - shortest time), minutes
  double worst_ratio = 0.0;  // worst excess divided by the OD free-flow shortest time
  std::size_t worst_od = 0;
  std::size_t paths_checked = 0;
};

// Decomposes each OD's link flow into paths and compares every path carrying
// at least `min_path_flow` vehicles against the OD's shortest time.
WardropReport wardrop_check(const netio::TrafficNetwork& net, const std::vector<netio::OdDemand>& od,
                            const AssignmentResult& result, double min_path_flow);

}  // namespace ptc::traffic
