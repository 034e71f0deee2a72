#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ptcosim/config.hpp"

namespace ptc::netio {

// ---------------------------------------------------------------------------
// Road network
// ---------------------------------------------------------------------------

struct Link {
  int id = 0;  // 1-based, file order
  int tail = 0;
  int head = 0;
  double free_flow_time = 0.0;  // minutes
  double capacity = 0.0;        // vehicles per interval
};

struct OdDemand {
  int origin = 0;
  int destination = 0;
  double vehicles = 0.0;

  bool operator==(const OdDemand&) const = default;
};

class TrafficNetwork {
 public:
  TrafficNetwork() = default;
  TrafficNetwork(std::vector<int> nodes, std::vector<Link> links, std::vector<OdDemand> od);

  const std::vector<int>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<OdDemand>& od() const { return od_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  bool has_node(int id) const { return index_.count(id) != 0; }
  // Dense 0-based index of a node id; throws on unknown ids.
  std::size_t node_index(int id) const;

  // Copy with every capacity multiplied by `factor`.
  TrafficNetwork with_capacity_scale(double factor) const;
  TrafficNetwork with_demand(std::vector<OdDemand> od) const;

 private:
  void validate() const;

  std::vector<int> nodes_;
  std::vector<Link> links_;
  std::vector<OdDemand> od_;
  std::unordered_map<int, std::size_t> index_;
};

bool operator==(const Link& a, const Link& b);
bool structurally_equal(const TrafficNetwork& a, const TrafficNetwork& b);

TrafficNetwork load_traffic_network(std::string_view tntp_text, std::string_view od_text);
TrafficNetwork load_traffic_network_files(const std::filesystem::path& net, const std::filesystem::path& trips);

std::string write_tntp_net(const TrafficNetwork& net);
std::string write_tntp_trips(const TrafficNetwork& net);

// ---------------------------------------------------------------------------
// Radial feeder
// ---------------------------------------------------------------------------

struct Bus {
  int id = 0;
  std::complex<double> load;  // p.u.
  double v_min = 0.81;        // squared magnitude, p.u.^2
  double v_max = 1.21;
  // Controllable generation on top of the fixed load, p.u.
  double gen_p_min = 0.0;
  double gen_p_max = 0.0;
  double gen_q_min = 0.0;
  double gen_q_max = 0.0;
};

struct Branch {
  int child = 0;
  int ancestor = 0;
  std::complex<double> z;  // p.u.
  double l_max = 1e6;      // squared current bound, p.u.^2
};

// Radial feeder. After construction the tree has been checked and the
// derived index arrays below are populated.
class PowerNetwork {
 public:
  PowerNetwork() = default;
  PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches, int slack, double base_mva = 1.0,
               double slack_v = 1.0);

  const std::vector<Bus>& buses() const { return buses_; }
  std::vector<Bus>& mutable_buses() { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  int slack() const { return slack_; }
  std::size_t slack_index() const { return slack_index_; }
  double base_mva() const { return base_mva_; }
  double slack_v() const { return slack_v_; }

  std::size_t bus_count() const { return buses_.size(); }
  bool has_bus(int id) const { return index_.count(id) != 0; }
  std::size_t bus_index(int id) const;

  // Indexed by bus index. parent(slack) == npos; branch_of(slack) == npos.
  std::size_t parent(std::size_t bus) const { return parent_[bus]; }
  std::size_t branch_of(std::size_t bus) const { return branch_of_[bus]; }
  const std::vector<std::size_t>& children(std::size_t bus) const { return children_[bus]; }
  // Breadth-first order from the slack bus.
  const std::vector<std::size_t>& order() const { return order_; }
  std::size_t depth() const { return depth_; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  void build();

  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  int slack_ = 0;
  std::size_t slack_index_ = 0;
  double base_mva_ = 1.0;
  double slack_v_ = 1.0;
  std::unordered_map<int, std::size_t> index_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> branch_of_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
  std::size_t depth_ = 0;
};

bool structurally_equal(const PowerNetwork& a, const PowerNetwork& b);

PowerNetwork load_feeder(std::string_view feeder_doc);
PowerNetwork load_feeder_file(const std::filesystem::path& path);
std::string write_feeder(const PowerNetwork& net);

// ---------------------------------------------------------------------------
// Coupling
// ---------------------------------------------------------------------------

struct CdsSite {
  int cds_id = 0;
  int pds_bus = 0;
  int uts_node = 0;
  double capacity = 0.0;  // vehicles
  double avg_rate = 0.0;  // MW per vehicle
  double parked = 0.0;    // vehicles
  double injection_bound = 0.0;  // MW, set by the market each interval
};

std::vector<CdsSite> couple_sites(const ScenarioConfig& cfg, const TrafficNetwork& tn, const PowerNetwork& pn,
                                  const std::vector<SiteSpec>& sites);

}  // namespace ptc::netio
