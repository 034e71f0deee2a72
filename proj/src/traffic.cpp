#include "ptcosim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include "parallel.hpp"
#include "ptcosim/error.hpp"

namespace ptc::traffic {
namespace {

using netio::OdDemand;
using netio::TrafficNetwork;

constexpr double kBprAlpha = 0.15;

// Outgoing link indices per node index, ascending link id.
std::vector<std::vector<std::size_t>> adjacency(const TrafficNetwork& net) {
  std::vector<std::vector<std::size_t>> out(net.node_count());
  for (std::size_t a = 0; a < net.link_count(); ++a) out[net.node_index(net.links()[a].tail)].push_back(a);
  return out;
}

ShortestPathTree dijkstra(const TrafficNetwork& net, const std::vector<std::vector<std::size_t>>& adj,
                          const std::vector<double>& times, std::size_t root) {
  ShortestPathTree tree;
  tree.dist.assign(net.node_count(), std::numeric_limits<double>::infinity());
  tree.pred.assign(net.node_count(), ShortestPathTree::npos);
  std::vector<char> settled(net.node_count(), 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  tree.dist[root] = 0.0;
  heap.push({0.0, root});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (settled[u]) continue;
    settled[u] = 1;
    for (auto a : adj[u]) {
      const auto v = net.node_index(net.links()[a].head);
      if (settled[v]) continue;
      const double nd = d + times[a];
      if (nd < tree.dist[v]) {
        tree.dist[v] = nd;
        tree.pred[v] = a;
        heap.push({nd, v});
      } else if (nd == tree.dist[v] && a < tree.pred[v]) {
        tree.pred[v] = a;
      }
    }
  }
  return tree;
}

std::vector<std::size_t> path_to(const TrafficNetwork& net, const ShortestPathTree& tree, std::size_t dest) {
  std::vector<std::size_t> path;
  std::size_t cur = dest;
  while (tree.pred[cur] != ShortestPathTree::npos) {
    const auto a = tree.pred[cur];
    path.push_back(a);
    cur = net.node_index(net.links()[a].tail);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// OD entries grouped by origin, groups in order of first appearance.
struct OriginGroup {
  int origin = 0;
  std::vector<std::size_t> entries;
};

std::vector<OriginGroup> group_by_origin(const std::vector<OdDemand>& od) {
  std::vector<OriginGroup> groups;
  std::map<int, std::size_t> slot;
  for (std::size_t k = 0; k < od.size(); ++k) {
    auto [it, fresh] = slot.emplace(od[k].origin, groups.size());
    if (fresh) groups.push_back({od[k].origin, {}});
    groups[it->second].entries.push_back(k);
  }
  return groups;
}

class Loader {
 public:
  Loader(const TrafficNetwork& net, const std::vector<OdDemand>& od, int threads)
      : net_(net), od_(od), adj_(adjacency(net)), groups_(group_by_origin(od)), threads_(threads) {}

  // Returns aggregate flows; fills per-OD shortest paths and distances when asked.
  LinkFlow load(const std::vector<double>& times, std::vector<std::vector<std::size_t>>* paths = nullptr,
                std::vector<double>* dists = nullptr) const {
    std::vector<LinkFlow> partial(groups_.size());
    if (paths) paths->assign(od_.size(), {});
    if (dists) dists->assign(od_.size(), 0.0);
    parallel_for(groups_.size(), threads_, [&](std::size_t g) {
      const auto& group = groups_[g];
      auto tree = dijkstra(net_, adj_, times, net_.node_index(group.origin));
      LinkFlow flow(net_.link_count(), 0.0);
      for (auto k : group.entries) {
        const auto& d = od_[k];
        const auto dest = net_.node_index(d.destination);
        if (!std::isfinite(tree.dist[dest]))
          fail(ErrorKind::Validation, "unreachable destination for OD pair " + std::to_string(d.origin) + "->" +
                                          std::to_string(d.destination));
        auto p = path_to(net_, tree, dest);
        for (auto a : p) flow[a] += d.vehicles;
        if (paths) (*paths)[k] = std::move(p);
        if (dists) (*dists)[k] = tree.dist[dest];
      }
      partial[g] = std::move(flow);
    });
    LinkFlow total(net_.link_count(), 0.0);
    for (const auto& f : partial)
      for (std::size_t a = 0; a < total.size(); ++a) total[a] += f[a];
    return total;
  }

 private:
  const TrafficNetwork& net_;
  const std::vector<OdDemand>& od_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<OriginGroup> groups_;
  int threads_;
};

std::vector<double> bpr_times(const TrafficNetwork& net, const LinkFlow& theta) {
  std::vector<double> t(net.link_count());
  for (std::size_t a = 0; a < t.size(); ++a)
    t[a] = bpr_time(net.links()[a].free_flow_time, net.links()[a].capacity, theta[a]);
  return t;
}

double line_search(const TrafficNetwork& net, const LinkFlow& theta, const LinkFlow& target, double tol,
                   double* value_at_step) {
  LinkFlow trial(theta.size());
  auto phi = [&](double z) {
    for (std::size_t a = 0; a < theta.size(); ++a) trial[a] = theta[a] + z * (target[a] - theta[a]);
    return beckmann_objective(net, trial);
  };
  const double at_zero = phi(0.0);
  double z = golden_section(phi, tol);
  double at_z = phi(z);
  if (!(at_z <= at_zero)) {
    z = 0.0;
    at_z = at_zero;
  }
  if (value_at_step) *value_at_step = at_z;
  return z;
}

}  // namespace

double bpr_time(double f0, double capacity, double theta) {
  if (f0 < 0 || capacity <= 0 || theta < 0 || !std::isfinite(theta))
    fail(ErrorKind::InvalidArgument, "bpr_time: domain error");
  const double r = theta / capacity;
  const double r2 = r * r;
  return f0 * (1.0 + kBprAlpha * r2 * r2);
}

double bpr_integral(double f0, double capacity, double theta) {
  const double r = theta / capacity;
  const double r2 = r * r;
  return f0 * theta * (1.0 + kBprAlpha * r2 * r2 / 5.0);
}

double beckmann_objective(const TrafficNetwork& net, const LinkFlow& theta) {
  if (theta.size() != net.link_count()) fail(ErrorKind::InvalidArgument, "flow vector size mismatch");
  double sum = 0.0;
  for (std::size_t a = 0; a < theta.size(); ++a)
    sum += bpr_integral(net.links()[a].free_flow_time, net.links()[a].capacity, theta[a]);
  return sum;
}

LinkCost link_costs(const TrafficNetwork& net, const LinkFlow& theta) {
  LinkCost c;
  c.times = bpr_times(net, theta);
  c.base.reserve(net.link_count());
  for (const auto& l : net.links()) c.base.push_back(l.free_flow_time);
  return c;
}

LinkCost free_flow_costs(const TrafficNetwork& net) { return link_costs(net, LinkFlow(net.link_count(), 0.0)); }

ShortestPathTree shortest_paths(const TrafficNetwork& net, const std::vector<double>& times, int origin) {
  return dijkstra(net, adjacency(net), times, net.node_index(origin));
}

std::vector<std::size_t> tree_path(const TrafficNetwork& net, const ShortestPathTree& tree, int destination) {
  return path_to(net, tree, net.node_index(destination));
}

LinkFlow all_or_nothing(const TrafficNetwork& net, const std::vector<double>& times, const std::vector<OdDemand>& od,
                        int threads) {
  for (double t : times)
    if (!(t >= 0)) fail(ErrorKind::InvalidArgument, "all_or_nothing: negative link cost");
  return Loader(net, od, threads).load(times);
}

double golden_section(const std::function<double(double)>& phi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = phi(x1), f2 = phi(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = phi(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = phi(x2);
    }
  }
  return 0.5 * (lo + hi);
}

AssignmentResult solve_sue_interval(const TrafficNetwork& net, const std::vector<OdDemand>& od,
                                    const std::vector<double>& initial_times, const AssignmentOptions& opt) {
  if (initial_times.size() != net.link_count()) fail(ErrorKind::InvalidArgument, "initial time vector size mismatch");
  for (const auto& d : od)
    if (!(d.vehicles >= 0)) fail(ErrorKind::InvalidArgument, "negative demand");
  Loader loader(net, od, opt.threads);
  AssignmentResult res;
  std::vector<std::vector<std::size_t>> paths;
  auto* paths_ptr = opt.track_od_flows ? &paths : nullptr;

  auto load_od = [&](std::vector<LinkFlow>& target) {
    target.assign(od.size(), LinkFlow(net.link_count(), 0.0));
    for (std::size_t k = 0; k < od.size(); ++k)
      for (auto a : paths[k]) target[k][a] += od[k].vehicles;
  };

  LinkFlow theta = loader.load(initial_times, paths_ptr);
  if (opt.track_od_flows) load_od(res.od_flows);
  double objective = beckmann_objective(net, theta);
  res.objective_trace.push_back(objective);

  double demand_total = 0.0;
  for (const auto& d : od) demand_total += d.vehicles;
  std::vector<LinkFlow> od_target;

  for (int n = 1; n <= opt.max_iter; ++n) {
    const auto times = bpr_times(net, theta);
    LinkFlow target = loader.load(times, paths_ptr);
    double value = objective;
    const double z = demand_total > 0 ? line_search(net, theta, target, opt.golden_tol, &value) : 0.0;
    double sq = 0.0, mass = 0.0;
    for (std::size_t a = 0; a < theta.size(); ++a) {
      const double step = z * (target[a] - theta[a]);
      sq += step * step;
      mass += theta[a];
      theta[a] += step;
    }
    if (opt.track_od_flows) {
      load_od(od_target);
      for (std::size_t k = 0; k < od.size(); ++k)
        for (std::size_t a = 0; a < theta.size(); ++a)
          res.od_flows[k][a] += z * (od_target[k][a] - res.od_flows[k][a]);
    }
    objective = value;
    res.objective_trace.push_back(objective);
    res.iterations = n;
    res.gap = mass > 0 ? std::sqrt(sq) / mass : 0.0;
    if (res.gap <= opt.eps) {
      res.converged = true;
      break;
    }
  }
  if (opt.max_iter <= 0) res.converged = demand_total == 0.0;

  res.flows = std::move(theta);
  res.objective = beckmann_objective(net, res.flows);
  loader.load(bpr_times(net, res.flows), nullptr, &res.od_times);
  return res;
}

LinkFlow frank_wolfe_step(const TrafficNetwork& net, const std::vector<OdDemand>& od, const LinkFlow& theta,
                          double golden_tol, int threads) {
  Loader loader(net, od, threads);
  LinkFlow target = loader.load(bpr_times(net, theta));
  const double z = line_search(net, theta, target, golden_tol, nullptr);
  LinkFlow out(theta.size());
  for (std::size_t a = 0; a < theta.size(); ++a) out[a] = theta[a] + z * (target[a] - theta[a]);
  return out;
}

double total_delay_hours(const TrafficNetwork& net, const LinkFlow& theta) {
  double minutes = 0.0;
  for (std::size_t a = 0; a < theta.size(); ++a) {
    const auto& l = net.links()[a];
    minutes += theta[a] * (bpr_time(l.free_flow_time, l.capacity, theta[a]) - l.free_flow_time);
  }
  return minutes / 60.0;
}

WardropReport wardrop_check(const TrafficNetwork& net, const std::vector<OdDemand>& od, const AssignmentResult& result,
                            double min_path_flow) {
  if (result.od_flows.size() != od.size())
    fail(ErrorKind::InvalidArgument, "wardrop_check needs per-OD flows (track_od_flows)");
  const auto adj = adjacency(net);
  const auto times = bpr_times(net, result.flows);
  const auto free = free_flow_costs(net).times;
  WardropReport rep;
  for (std::size_t k = 0; k < od.size(); ++k) {
    const auto& d = od[k];
    if (d.vehicles <= 0) continue;
    const auto root = net.node_index(d.origin);
    const auto dest = net.node_index(d.destination);
    const double shortest = dijkstra(net, adj, times, root).dist[dest];
    const double free_shortest = dijkstra(net, adj, free, root).dist[dest];
    LinkFlow x = result.od_flows[k];
    const double floor = 1e-12 * d.vehicles;
    double remaining = d.vehicles;
    for (int guard = 0; remaining > 1e-9 * d.vehicles && guard < 100000; ++guard) {
      // Walk along the heaviest outgoing link until the destination or a repeat.
      std::vector<std::size_t> walk;
      std::vector<long> seen_at(net.node_count(), -1);
      std::size_t u = root;
      seen_at[u] = 0;
      bool dead_end = false;
      while (u != dest) {
        std::size_t best = ShortestPathTree::npos;
        for (auto a : adj[u])
          if (x[a] > floor && (best == ShortestPathTree::npos || x[a] > x[best])) best = a;
        if (best == ShortestPathTree::npos) {
          dead_end = true;
          break;
        }
        walk.push_back(best);
        u = net.node_index(net.links()[best].head);
        if (seen_at[u] >= 0) break;
        seen_at[u] = static_cast<long>(walk.size());
      }
      if (dead_end) {
        if (walk.empty()) break;
        x[walk.back()] = 0.0;
        continue;
      }
      if (u != dest) {
        // Cancel the cycle that closed at u.
        const auto start = static_cast<std::size_t>(seen_at[u]);
        double cyc = std::numeric_limits<double>::infinity();
        for (std::size_t i = start; i < walk.size(); ++i) cyc = std::min(cyc, x[walk[i]]);
        for (std::size_t i = start; i < walk.size(); ++i) x[walk[i]] -= cyc;
        continue;
      }
      double bottleneck = std::numeric_limits<double>::infinity();
      double path_time = 0.0;
      for (auto a : walk) {
        bottleneck = std::min(bottleneck, x[a]);
        path_time += times[a];
      }
      for (auto a : walk) x[a] -= bottleneck;
      remaining -= bottleneck;
      if (bottleneck < min_path_flow) continue;
      ++rep.paths_checked;
      const double excess = path_time - shortest;
      const double ratio = excess / free_shortest;
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.max_excess = excess;
        rep.worst_od = k;
      }
    }
  }
  return rep;
}

}  // namespace ptc::traffic
