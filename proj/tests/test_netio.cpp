#include <gtest/gtest.h>

#include <random>

#include "ptcosim/error.hpp"
#include "ptcosim/netio.hpp"

using namespace ptc;
using namespace ptc::netio;

namespace {

const std::string kData = PTC_TEST_DATA;
const std::string kRepo = PTC_REPO_DATA;

std::string expect_error(const std::function<void()>& fn, ErrorKind kind) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(static_cast<int>(e.kind()), static_cast<int>(kind)) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

PowerNetwork random_tree(std::mt19937& rng, int n) {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    Bus b;
    b.id = i;
    b.load = {0.05 * u(rng), 0.02 * u(rng)};
    buses.push_back(b);
    if (i > 0) {
      Branch br;
      br.child = i;
      br.ancestor = std::uniform_int_distribution<int>(0, i - 1)(rng);
      br.z = {0.01 + 0.01 * u(rng), 0.01 + 0.02 * u(rng)};
      branches.push_back(br);
    }
  }
  return PowerNetwork(buses, branches, 0, 1.0);
}

}  // namespace

TEST(TrafficNetworkLoad, TwoNodeMinimal) {
  auto tn = load_traffic_network_files(kData + "/traffic/two_node_net.tntp", kData + "/traffic/two_node_trips.tntp");
  ASSERT_EQ(tn.link_count(), 1u);
  EXPECT_EQ(tn.node_count(), 2u);
  EXPECT_DOUBLE_EQ(tn.links()[0].free_flow_time, 10.0);
  EXPECT_DOUBLE_EQ(tn.links()[0].capacity, 100.0);
  ASSERT_EQ(tn.od().size(), 1u);
  EXPECT_DOUBLE_EQ(tn.od()[0].vehicles, 50.0);
}

TEST(TrafficNetworkLoad, SiouxFalls) {
  auto tn = load_traffic_network_files(kRepo + "/siouxfalls/SiouxFalls_net.tntp",
                                       kRepo + "/siouxfalls/table1_trips.tntp");
  EXPECT_EQ(tn.node_count(), 24u);
  EXPECT_EQ(tn.link_count(), 76u);
  EXPECT_EQ(tn.od().size(), 36u);
  double total = 0.0;
  for (const auto& d : tn.od()) total += d.vehicles;
  EXPECT_DOUBLE_EQ(total, 9996.0);
  // File order is the flow-vector order.
  EXPECT_EQ(tn.links()[0].tail, 1);
  EXPECT_EQ(tn.links()[0].head, 2);
  EXPECT_EQ(tn.links()[75].tail, 24);
  EXPECT_EQ(tn.links()[75].head, 23);
}

TEST(TrafficNetworkLoad, ZeroCapacityRejected) {
  std::string net =
      "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n 1 2 0 1 10 0.15 4 0 0 1 ;\n";
  auto msg = expect_error([&] { load_traffic_network(net, "Origin 1\n 2 : 5;\n"); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("nonpositive capacity"), std::string::npos);
}

TEST(TrafficNetworkLoad, ParseErrorCarriesLineNumber) {
  std::string net = "<NUMBER OF LINKS> 1\n<END OF METADATA>\n 1 2 abc 1 10 ;\n";
  auto msg = expect_error([&] { load_traffic_network(net, ""); }, ErrorKind::Parse);
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(TrafficNetworkLoad, LinkCountMismatch) {
  std::string net = "<NUMBER OF LINKS> 2\n<END OF METADATA>\n 1 2 5 1 10 ;\n";
  expect_error([&] { load_traffic_network(net, ""); }, ErrorKind::Validation);
}

TEST(TrafficNetworkLoad, UnknownOdEndpoint) {
  std::string net = "<NUMBER OF LINKS> 1\n<END OF METADATA>\n 1 2 5 1 10 ;\n";
  expect_error([&] { load_traffic_network(net, "Origin 1\n 7 : 5;\n"); }, ErrorKind::Validation);
}

TEST(TrafficNetworkLoad, RoundTrip) {
  auto tn = load_traffic_network_files(kRepo + "/siouxfalls/SiouxFalls_net.tntp",
                                       kRepo + "/siouxfalls/table1_trips.tntp");
  auto again = load_traffic_network(write_tntp_net(tn), write_tntp_trips(tn));
  EXPECT_TRUE(structurally_equal(tn, again));
}

TEST(FeederLoad, TwoBus) {
  auto pn = load_feeder_file(kData + "/feeders/two_bus.txt");
  EXPECT_EQ(pn.bus_count(), 2u);
  ASSERT_EQ(pn.branches().size(), 1u);
  EXPECT_DOUBLE_EQ(pn.branches()[0].z.real(), 0.01);
  EXPECT_DOUBLE_EQ(pn.branches()[0].z.imag(), 0.02);
  EXPECT_EQ(pn.depth(), 1u);
  // Voltage bounds are held squared.
  EXPECT_NEAR(pn.buses()[1].v_min, 0.81, 1e-15);
}

TEST(FeederLoad, ThreeBusChainDepth) {
  auto pn = load_feeder_file(kData + "/feeders/three_bus.txt");
  EXPECT_EQ(pn.depth(), 2u);
  EXPECT_EQ(pn.parent(pn.bus_index(2)), pn.bus_index(1));
  EXPECT_EQ(pn.order().front(), pn.slack_index());
}

TEST(FeederLoad, LoopRejected) {
  auto msg = expect_error([] { load_feeder_file(kData + "/feeders/loop.txt"); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("cycle detected"), std::string::npos) << msg;
}

TEST(FeederLoad, MissingSlack) {
  auto msg = expect_error([] { load_feeder("bus 0 load_p 0 load_q 0 vmin 1 vmax 1\n"); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("missing slack"), std::string::npos);
}

TEST(FeederLoad, DisconnectedBus) {
  auto msg = expect_error(
      [] { load_feeder("slack 0\nbus 0 load_p 0 load_q 0 vmin 1 vmax 1\nbus 1 load_p 0 load_q 0 vmin 1 vmax 1\n"); },
      ErrorKind::Validation);
  EXPECT_NE(msg.find("disconnected bus"), std::string::npos);
}

TEST(FeederLoad, DetachedCycleIsNotMistakenForDisconnected) {
  // Buses 1 and 2 point at each other and never reach the slack.
  auto msg = expect_error(
      [] {
        load_feeder(
            "slack 0\nbus 0 load_p 0 load_q 0 vmin 1 vmax 1\nbus 1 load_p 0 load_q 0 vmin 1 vmax 1\n"
            "bus 2 load_p 0 load_q 0 vmin 1 vmax 1\nbranch 1 2 r 0 x 0.1\nbranch 2 1 r 0 x 0.1\n");
      },
      ErrorKind::Validation);
  EXPECT_NE(msg.find("cycle detected"), std::string::npos) << msg;
}

TEST(FeederLoad, NegativeResistanceRejected) {
  expect_error(
      [] {
        load_feeder("slack 0\nbus 0 load_p 0 load_q 0 vmin 1 vmax 1\nbus 1 load_p 0 load_q 0 vmin 0.9 vmax 1.1\n"
                    "branch 1 0 r -0.1 x 0.1\n");
      },
      ErrorKind::Validation);
}

TEST(FeederLoad, ParseErrorLine) {
  auto msg = expect_error([] { load_feeder("slack 0\nbus 0 load_p x\n"); }, ErrorKind::Parse);
  EXPECT_NE(msg.find("line 2"), std::string::npos);
}

TEST(FeederProperties, RoundTripRandomTrees) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto pn = random_tree(rng, 2 + trial % 40);
    auto again = load_feeder(write_feeder(pn));
    EXPECT_TRUE(structurally_equal(pn, again)) << "trial " << trial;
  }
}

TEST(FeederProperties, RandomEdgeAdditionsRejected) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + trial % 30;
    auto pn = random_tree(rng, n);
    auto branches = pn.branches();
    std::uniform_int_distribution<int> pick(0, n - 1);
    int a = pick(rng), b = pick(rng);
    while (b == a) b = pick(rng);
    branches.push_back({a, b, {0.01, 0.01}, 1e6});
    EXPECT_THROW(PowerNetwork(pn.buses(), branches, 0, 1.0), Error) << "trial " << trial;
  }
}

TEST(Coupling, PaperSiteList) {
  auto tn = load_traffic_network_files(kRepo + "/siouxfalls/SiouxFalls_net.tntp",
                                       kRepo + "/siouxfalls/table1_trips.tntp");
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  for (int i = 0; i <= 11; ++i) {
    buses.push_back({i, {0.0, 0.0}});
    if (i) branches.push_back({i, i - 1, {0.01, 0.01}, 1e6});
  }
  PowerNetwork pn(buses, branches, 0);
  ScenarioConfig cfg;
  std::vector<SiteSpec> specs;
  const int nodes[] = {2, 3, 5, 8, 10, 11, 17, 18, 20, 22, 23};
  for (int k = 0; k < 11; ++k) specs.push_back({k + 1, k + 1, nodes[k]});
  auto sites = couple_sites(cfg, tn, pn, specs);
  ASSERT_EQ(sites.size(), 11u);
  for (const auto& s : sites) {
    EXPECT_EQ(s.parked, 0.0);
    EXPECT_EQ(s.capacity, cfg.cds_capacity);
  }
  EXPECT_TRUE(couple_sites(cfg, tn, pn, {}).empty());

  auto msg = expect_error([&] { couple_sites(cfg, tn, pn, {{1, 1, 99}}); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("unknown node"), std::string::npos);
  msg = expect_error([&] { couple_sites(cfg, tn, pn, {{1, 1, 2}, {1, 2, 3}}); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("duplicate cds_id"), std::string::npos);
  msg = expect_error([&] { couple_sites(cfg, tn, pn, {{1, 42, 2}}); }, ErrorKind::Validation);
  EXPECT_NE(msg.find("unknown bus"), std::string::npos);
}
