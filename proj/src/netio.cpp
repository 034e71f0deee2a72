#include "ptcosim/netio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ptcosim/error.hpp"
#include "text.hpp"

namespace ptc::netio {
namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

std::string fmt(double v) {
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

// Metadata tag such as "<NUMBER OF LINKS> 76" -> {"NUMBER OF LINKS", "76"}.
std::pair<std::string, std::string_view> split_tag(std::string_view line) {
  auto close_pos = line.find('>');
  return {std::string(line.substr(1, close_pos - 1)), text::trim(line.substr(close_pos + 1))};
}

}  // namespace

// ---------------------------------------------------------------------------
// TrafficNetwork
// ---------------------------------------------------------------------------

TrafficNetwork::TrafficNetwork(std::vector<int> nodes, std::vector<Link> links, std::vector<OdDemand> od)
    : nodes_(std::move(nodes)), links_(std::move(links)), od_(std::move(od)) {
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_[nodes_[i]] = i;
  validate();
}

std::size_t TrafficNetwork::node_index(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::Validation, "unknown node " + std::to_string(id));
  return it->second;
}

void TrafficNetwork::validate() const {
  for (const auto& l : links_) {
    if (!has_node(l.tail) || !has_node(l.head))
      fail(ErrorKind::Validation, "link " + std::to_string(l.id) + " references an unknown node");
    if (!(l.capacity > 0) || !std::isfinite(l.capacity))
      fail(ErrorKind::Validation, "link " + std::to_string(l.id) + ": nonpositive capacity");
    if (!(l.free_flow_time > 0) || !std::isfinite(l.free_flow_time))
      fail(ErrorKind::Validation, "link " + std::to_string(l.id) + ": nonpositive free-flow time");
  }
  for (const auto& d : od_) {
    if (!has_node(d.origin) || !has_node(d.destination))
      fail(ErrorKind::Validation, "OD pair " + std::to_string(d.origin) + "->" + std::to_string(d.destination) +
                                      " references an unknown node");
    if (!(d.vehicles >= 0) || !std::isfinite(d.vehicles))
      fail(ErrorKind::Validation, "OD pair " + std::to_string(d.origin) + "->" + std::to_string(d.destination) +
                                      ": negative demand");
  }
}

TrafficNetwork TrafficNetwork::with_capacity_scale(double factor) const {
  auto links = links_;
  for (auto& l : links) l.capacity *= factor;
  return TrafficNetwork(nodes_, std::move(links), od_);
}

TrafficNetwork TrafficNetwork::with_demand(std::vector<OdDemand> od) const {
  return TrafficNetwork(nodes_, links_, std::move(od));
}

bool operator==(const Link& a, const Link& b) {
  return a.id == b.id && a.tail == b.tail && a.head == b.head && close(a.free_flow_time, b.free_flow_time) &&
         close(a.capacity, b.capacity);
}

bool structurally_equal(const TrafficNetwork& a, const TrafficNetwork& b) {
  if (a.nodes() != b.nodes() || a.links().size() != b.links().size() || a.od().size() != b.od().size()) return false;
  for (std::size_t i = 0; i < a.links().size(); ++i)
    if (!(a.links()[i] == b.links()[i])) return false;
  for (std::size_t i = 0; i < a.od().size(); ++i) {
    const auto& x = a.od()[i];
    const auto& y = b.od()[i];
    if (x.origin != y.origin || x.destination != y.destination || !close(x.vehicles, y.vehicles)) return false;
  }
  return true;
}

TrafficNetwork load_traffic_network(std::string_view tntp_text, std::string_view od_text) {
  // --- link file ---
  long long declared_nodes = -1;
  long long declared_links = -1;
  bool in_body = false;
  std::vector<Link> links;
  std::set<int> nodes;
  int lineno = 0;
  for (auto raw : text::lines(tntp_text)) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '~') continue;
    if (!in_body) {
      if (line.front() != '<') parse_error(lineno, "expected a metadata tag before <END OF METADATA>");
      if (line.find('>') == std::string_view::npos) parse_error(lineno, "unterminated metadata tag");
      auto [tag, value] = split_tag(line);
      if (tag == "END OF METADATA") {
        in_body = true;
      } else if (tag == "NUMBER OF NODES") {
        auto v = text::to_int(value);
        if (!v) parse_error(lineno, "bad <NUMBER OF NODES>");
        declared_nodes = *v;
      } else if (tag == "NUMBER OF LINKS") {
        auto v = text::to_int(value);
        if (!v) parse_error(lineno, "bad <NUMBER OF LINKS>");
        declared_links = *v;
      }
      continue;
    }
    if (auto semi = line.find(';'); semi != std::string_view::npos) line = line.substr(0, semi);
    auto toks = text::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 5) parse_error(lineno, "link record needs at least 5 columns");
    auto tail = text::to_int(toks[0]);
    auto head = text::to_int(toks[1]);
    auto cap = text::to_double(toks[2]);
    auto fftt = text::to_double(toks[4]);
    if (!tail || !head || !cap || !fftt) parse_error(lineno, "malformed link record");
    for (std::size_t k = 5; k < toks.size(); ++k)
      if (!text::to_double(toks[k])) parse_error(lineno, "malformed link record");
    Link l;
    l.id = static_cast<int>(links.size()) + 1;
    l.tail = static_cast<int>(*tail);
    l.head = static_cast<int>(*head);
    l.capacity = *cap;
    l.free_flow_time = *fftt;
    links.push_back(l);
    nodes.insert(l.tail);
    nodes.insert(l.head);
  }
  if (!in_body) fail(ErrorKind::Parse, "missing <END OF METADATA>");
  if (declared_links >= 0 && static_cast<long long>(links.size()) != declared_links)
    fail(ErrorKind::Validation, "declared " + std::to_string(declared_links) + " links but found " +
                                    std::to_string(links.size()));
  std::vector<int> node_list(nodes.begin(), nodes.end());
  if (declared_nodes > static_cast<long long>(node_list.size())) {
    // Isolated nodes are legal in TNTP; number them 1..N.
    for (int id = 1; id <= declared_nodes; ++id)
      if (!nodes.count(id)) node_list.push_back(id);
  }

  // --- trips file ---
  std::vector<OdDemand> od;
  int origin = -1;
  bool trips_body = false;
  lineno = 0;
  for (auto raw : text::lines(od_text)) {
    ++lineno;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '~') continue;
    if (line.front() == '<') {
      if (line.find('>') == std::string_view::npos) parse_error(lineno, "unterminated metadata tag");
      if (split_tag(line).first == "END OF METADATA") trips_body = true;
      continue;
    }
    trips_body = true;
    if (line.rfind("Origin", 0) == 0) {
      auto v = text::to_int(line.substr(6));
      if (!v) parse_error(lineno, "bad Origin line");
      origin = static_cast<int>(*v);
      continue;
    }
    if (origin < 0) parse_error(lineno, "destination entries before any 'Origin' line");
    std::string_view rest = line;
    while (!text::trim(rest).empty()) {
      auto semi = rest.find(';');
      auto entry = text::trim(rest.substr(0, semi));
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      if (entry.empty()) continue;
      auto colon = entry.find(':');
      if (colon == std::string_view::npos) parse_error(lineno, "expected 'dest : flow;'");
      auto dest = text::to_int(entry.substr(0, colon));
      auto flow = text::to_double(entry.substr(colon + 1));
      if (!dest || !flow) parse_error(lineno, "malformed 'dest : flow' entry");
      if (*flow == 0.0 || *dest == origin) continue;
      od.push_back({origin, static_cast<int>(*dest), *flow});
    }
  }
  (void)trips_body;
  return TrafficNetwork(std::move(node_list), std::move(links), std::move(od));
}

TrafficNetwork load_traffic_network_files(const std::filesystem::path& net, const std::filesystem::path& trips) {
  return load_traffic_network(read_file(net), read_file(trips));
}

std::string write_tntp_net(const TrafficNetwork& net) {
  std::ostringstream out;
  out << "<NUMBER OF NODES> " << net.node_count() << "\n";
  out << "<NUMBER OF LINKS> " << net.link_count() << "\n";
  out << "<END OF METADATA>\n\n";
  out << "~\ttail\thead\tcapacity\tlength\tfftt\tB\tpower\tspeed\ttoll\ttype\t;\n";
  for (const auto& l : net.links())
    out << "\t" << l.tail << "\t" << l.head << "\t" << fmt(l.capacity) << "\t" << fmt(l.free_flow_time) << "\t"
        << fmt(l.free_flow_time) << "\t0.15\t4\t0\t0\t1\t;\n";
  return out.str();
}

std::string write_tntp_trips(const TrafficNetwork& net) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << net.node_count() << "\n<END OF METADATA>\n\n";
  int current = -1;
  for (const auto& d : net.od()) {
    if (d.origin != current) {
      if (current != -1) out << "\n";
      out << "Origin " << d.origin << "\n";
      current = d.origin;
    }
    out << "  " << d.destination << " : " << fmt(d.vehicles) << ";";
  }
  out << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// PowerNetwork
// ---------------------------------------------------------------------------

PowerNetwork::PowerNetwork(std::vector<Bus> buses, std::vector<Branch> branches, int slack, double base_mva,
                           double slack_v)
    : buses_(std::move(buses)), branches_(std::move(branches)), slack_(slack), base_mva_(base_mva), slack_v_(slack_v) {
  build();
}

std::size_t PowerNetwork::bus_index(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorKind::Validation, "unknown bus " + std::to_string(id));
  return it->second;
}

void PowerNetwork::build() {
  if (buses_.empty()) fail(ErrorKind::Validation, "feeder has no buses");
  index_.clear();
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    const auto& b = buses_[i];
    if (!index_.emplace(b.id, i).second) fail(ErrorKind::Validation, "duplicate bus " + std::to_string(b.id));
    if (!(b.v_min <= b.v_max)) fail(ErrorKind::Validation, "bus " + std::to_string(b.id) + ": vmin > vmax");
    if (!(b.gen_p_min <= b.gen_p_max) || !(b.gen_q_min <= b.gen_q_max))
      fail(ErrorKind::Validation, "bus " + std::to_string(b.id) + ": generation bounds inverted");
  }
  if (!index_.count(slack_)) fail(ErrorKind::Validation, "missing slack bus");
  slack_index_ = index_.at(slack_);
  if (!(base_mva_ > 0)) fail(ErrorKind::Validation, "base_mva must be positive");

  const std::size_t n = buses_.size();
  parent_.assign(n, npos);
  branch_of_.assign(n, npos);
  children_.assign(n, {});
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const auto& br = branches_[k];
    if (!index_.count(br.child) || !index_.count(br.ancestor))
      fail(ErrorKind::Validation, "branch " + std::to_string(br.child) + "-" + std::to_string(br.ancestor) +
                                      " references an unknown bus");
    if (br.z.real() < 0) fail(ErrorKind::Validation, "branch " + std::to_string(br.child) + ": negative resistance");
    if (br.l_max < 0) fail(ErrorKind::Validation, "branch " + std::to_string(br.child) + ": negative lmax");
    auto c = index_.at(br.child);
    auto a = index_.at(br.ancestor);
    if (c == a) fail(ErrorKind::Validation, "cycle detected: self-loop at bus " + std::to_string(br.child));
    if (c == slack_index_ || parent_[c] != npos)
      fail(ErrorKind::Validation, "cycle detected: bus " + std::to_string(br.child) + " has more than one ancestor");
    parent_[c] = a;
    branch_of_[c] = k;
  }
  // Walking ancestors from every bus must terminate at the slack.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t steps = 0;
    std::size_t cur = i;
    while (cur != slack_index_) {
      if (parent_[cur] == npos)
        fail(ErrorKind::Validation, "disconnected bus " + std::to_string(buses_[cur].id));
      cur = parent_[cur];
      if (++steps > n) fail(ErrorKind::Validation, "cycle detected through bus " + std::to_string(buses_[i].id));
    }
  }
  if (branches_.size() != n - 1) fail(ErrorKind::Validation, "branch count must equal bus count - 1");
  for (std::size_t i = 0; i < n; ++i)
    if (parent_[i] != npos) children_[parent_[i]].push_back(i);

  order_.clear();
  std::vector<std::size_t> level(n, 0);
  std::deque<std::size_t> queue{slack_index_};
  depth_ = 0;
  while (!queue.empty()) {
    auto u = queue.front();
    queue.pop_front();
    order_.push_back(u);
    for (auto c : children_[u]) {
      level[c] = level[u] + 1;
      depth_ = std::max(depth_, level[c]);
      queue.push_back(c);
    }
  }
}

bool structurally_equal(const PowerNetwork& a, const PowerNetwork& b) {
  if (a.bus_count() != b.bus_count() || a.branches().size() != b.branches().size() || a.slack() != b.slack() ||
      !close(a.base_mva(), b.base_mva()) || !close(a.slack_v(), b.slack_v()))
    return false;
  for (std::size_t i = 0; i < a.bus_count(); ++i) {
    const auto& x = a.buses()[i];
    const auto& y = b.buses()[i];
    if (x.id != y.id || !close(x.load.real(), y.load.real()) || !close(x.load.imag(), y.load.imag()) ||
        !close(x.v_min, y.v_min) || !close(x.v_max, y.v_max) || !close(x.gen_p_min, y.gen_p_min) ||
        !close(x.gen_p_max, y.gen_p_max) || !close(x.gen_q_min, y.gen_q_min) || !close(x.gen_q_max, y.gen_q_max))
      return false;
  }
  for (std::size_t k = 0; k < a.branches().size(); ++k) {
    const auto& x = a.branches()[k];
    const auto& y = b.branches()[k];
    if (x.child != y.child || x.ancestor != y.ancestor || !close(x.z.real(), y.z.real()) ||
        !close(x.z.imag(), y.z.imag()) || !close(x.l_max, y.l_max))
      return false;
  }
  return true;
}

PowerNetwork load_feeder(std::string_view doc) {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::optional<int> slack;
  double base_mva = 1.0;
  double slack_v = 1.0;
  int lineno = 0;

  auto number = [&](std::string_view tok) {
    auto v = text::to_double(tok);
    if (!v) parse_error(lineno, "not a number: '" + std::string(tok) + "'");
    return *v;
  };
  auto integer = [&](std::string_view tok) {
    auto v = text::to_int(tok);
    if (!v) parse_error(lineno, "not an integer id: '" + std::string(tok) + "'");
    return static_cast<int>(*v);
  };
  // Remaining tokens are `name value` pairs.
  auto pairs = [&](const std::vector<std::string_view>& toks, std::size_t from) {
    std::map<std::string, double, std::less<>> kv;
    if ((toks.size() - from) % 2 != 0) parse_error(lineno, "expected 'name value' pairs");
    for (std::size_t i = from; i < toks.size(); i += 2) kv[std::string(toks[i])] = number(toks[i + 1]);
    return kv;
  };

  for (auto raw : text::lines(doc)) {
    ++lineno;
    auto line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto toks = text::split_ws(line);
    if (toks.empty()) continue;
    const auto kind = toks[0];
    if (kind == "base_mva") {
      if (toks.size() != 2) parse_error(lineno, "expected 'base_mva <value>'");
      base_mva = number(toks[1]);
    } else if (kind == "slack") {
      if (toks.size() != 2 && toks.size() != 4) parse_error(lineno, "expected 'slack <id> [v <magnitude>]'");
      slack = integer(toks[1]);
      if (toks.size() == 4) {
        if (toks[2] != "v") parse_error(lineno, "expected 'v <magnitude>'");
        double mag = number(toks[3]);
        slack_v = mag * mag;
      }
    } else if (kind == "bus") {
      if (toks.size() < 2) parse_error(lineno, "expected 'bus <id> ...'");
      Bus b;
      b.id = integer(toks[1]);
      auto kv = pairs(toks, 2);
      double lp = 0.0, lq = 0.0;
      for (const auto& [k, v] : kv) {
        if (k == "load_p") lp = v;
        else if (k == "load_q") lq = v;
        else if (k == "vmin") b.v_min = v * v;
        else if (k == "vmax") b.v_max = v * v;
        else if (k == "pmin") b.gen_p_min = v;
        else if (k == "pmax") b.gen_p_max = v;
        else if (k == "qmin") b.gen_q_min = v;
        else if (k == "qmax") b.gen_q_max = v;
        else parse_error(lineno, "unknown bus field '" + k + "'");
      }
      b.load = {lp, lq};
      buses.push_back(b);
    } else if (kind == "branch") {
      if (toks.size() < 3) parse_error(lineno, "expected 'branch <child> <ancestor> ...'");
      Branch br;
      br.child = integer(toks[1]);
      br.ancestor = integer(toks[2]);
      auto kv = pairs(toks, 3);
      double r = 0.0, x = 0.0;
      for (const auto& [k, v] : kv) {
        if (k == "r") r = v;
        else if (k == "x") x = v;
        else if (k == "lmax") br.l_max = v;
        else parse_error(lineno, "unknown branch field '" + k + "'");
      }
      br.z = {r, x};
      branches.push_back(br);
    } else {
      parse_error(lineno, "unknown record '" + std::string(kind) + "'");
    }
  }
  if (!slack) fail(ErrorKind::Validation, "missing slack bus");
  return PowerNetwork(std::move(buses), std::move(branches), *slack, base_mva, slack_v);
}

PowerNetwork load_feeder_file(const std::filesystem::path& path) { return load_feeder(read_file(path)); }

std::string write_feeder(const PowerNetwork& net) {
  std::ostringstream out;
  out << "base_mva " << fmt(net.base_mva()) << "\n";
  out << "slack " << net.slack() << " v " << fmt(std::sqrt(net.slack_v())) << "\n";
  for (const auto& b : net.buses()) {
    out << "bus " << b.id << " load_p " << fmt(b.load.real()) << " load_q " << fmt(b.load.imag()) << " vmin "
        << fmt(std::sqrt(b.v_min)) << " vmax " << fmt(std::sqrt(b.v_max));
    if (b.gen_p_min != 0 || b.gen_p_max != 0 || b.gen_q_min != 0 || b.gen_q_max != 0)
      out << " pmin " << fmt(b.gen_p_min) << " pmax " << fmt(b.gen_p_max) << " qmin " << fmt(b.gen_q_min) << " qmax "
          << fmt(b.gen_q_max);
    out << "\n";
  }
  for (const auto& br : net.branches())
    out << "branch " << br.child << " " << br.ancestor << " r " << fmt(br.z.real()) << " x " << fmt(br.z.imag())
        << " lmax " << fmt(br.l_max) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Coupling
// ---------------------------------------------------------------------------

std::vector<CdsSite> couple_sites(const ScenarioConfig& cfg, const TrafficNetwork& tn, const PowerNetwork& pn,
                                  const std::vector<SiteSpec>& sites) {
  std::vector<CdsSite> out;
  std::set<int> seen;
  for (const auto& s : sites) {
    if (!seen.insert(s.cds_id).second) fail(ErrorKind::Validation, "duplicate cds_id " + std::to_string(s.cds_id));
    if (!pn.has_bus(s.pds_bus)) fail(ErrorKind::Validation, "unknown bus " + std::to_string(s.pds_bus));
    if (!tn.has_node(s.uts_node)) fail(ErrorKind::Validation, "unknown node " + std::to_string(s.uts_node));
    if (!(cfg.avg_rate > 0)) fail(ErrorKind::Validation, "avg_rate must be > 0");
    CdsSite site;
    site.cds_id = s.cds_id;
    site.pds_bus = s.pds_bus;
    site.uts_node = s.uts_node;
    site.capacity = cfg.cds_capacity;
    site.avg_rate = cfg.avg_rate;
    out.push_back(site);
  }
  return out;
}

}  // namespace ptc::netio
