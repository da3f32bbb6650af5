#include "chainsim/net_model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <queue>
#include <set>

using namespace chainsim;

TEST_CASE("haversine distances on reference points") {
    const GeoLocation origin{0.0, 0.0};
    REQUIRE(haversine_km(origin, origin) == 0.0);

    const double half = haversine_km(origin, GeoLocation{0.0, 180.0});
    REQUIRE_THAT(half, Catch::Matchers::WithinAbs(20015.0, 1.0));

    const double quarter = haversine_km(origin, GeoLocation{0.0, 90.0});
    REQUIRE_THAT(quarter, Catch::Matchers::WithinAbs(10007.5, 1.0));

    // symmetry
    const GeoLocation a{48.2, 16.4}, b{-33.9, 151.2};
    REQUIRE(haversine_km(a, b) == haversine_km(b, a));
}

TEST_CASE("affine link latency") {
    const LatencyModel model{};
    REQUIRE(model(0.0) == 0.005);
    REQUIRE_THAT(model(10000.0), Catch::Matchers::WithinRel(0.055, 1e-12));
    REQUIRE(model(100.0) < model(200.0));
}

TEST_CASE("transfer time is size over sampled bandwidth plus latency") {
    RandomStream bw(1, "bandwidth");
    Link link;
    link.bandwidth_mean_mbps = 10.0;
    link.bandwidth_std_mbps = 0.0;
    link.latency_s = 0.05;

    NetMessage one_mb{0, 1, 1.0, NetMsgType::Block};
    REQUIRE_THAT(transfer_time(one_mb, link, bw), Catch::Matchers::WithinRel(0.15, 1e-12));

    NetMessage config_block{0, 1, 0.25, NetMsgType::Block};
    REQUIRE_THAT(transfer_time(config_block, link, bw), Catch::Matchers::WithinRel(0.075, 1e-12));

    SECTION("per-message sampling varies with sigma > 0") {
        link.bandwidth_std_mbps = 0.5;
        const double t1 = transfer_time(one_mb, link, bw);
        const double t2 = transfer_time(one_mb, link, bw);
        REQUIRE(t1 != t2);
        REQUIRE(t1 >= link.latency_s);
        REQUIRE(t2 >= link.latency_s);
    }
}

TEST_CASE("topology: paper-scale graph is 16-regular and connected") {
    RandomStream geo(10, "geography"), topo(10, "topology");
    const Topology t = build_topology(32, 16, geo, topo);
    REQUIRE(t.node_count() == 32);
    for (NodeId v = 0; v < 32; ++v) {
        REQUIRE(t.adjacency[v].size() == 16);
        std::set<NodeId> distinct(t.adjacency[v].begin(), t.adjacency[v].end());
        REQUIRE(distinct.size() == 16);
        REQUIRE(distinct.count(v) == 0);
        REQUIRE(t.locations[v].latitude >= -60.0);
        REQUIRE(t.locations[v].latitude <= 60.0);
        for (const NodeId w : t.adjacency[v]) {
            REQUIRE(t.connected(w, v));  // symmetric adjacency
        }
    }
}

TEST_CASE("topology: two nodes, one link") {
    RandomStream geo(3, "geography"), topo(3, "topology");
    const Topology t = build_topology(2, 1, geo, topo);
    REQUIRE(t.adjacency[0] == std::vector<NodeId>{1});
    REQUIRE(t.adjacency[1] == std::vector<NodeId>{0});
}

TEST_CASE("topology: odd stub count is infeasible") {
    RandomStream geo(4, "geography"), topo(4, "topology");
    try {
        build_topology(3, 1, geo, topo);
        FAIL("expected TopologyInfeasible");
    } catch (const SimError& e) {
        REQUIRE(e.code() == ErrorCode::TopologyInfeasible);
    }
}

TEST_CASE("topology regeneration with identical streams is identical") {
    RandomStream geo1(9, "geography"), topo1(9, "topology");
    RandomStream geo2(9, "geography"), topo2(9, "topology");
    const Topology a = build_topology(16, 4, geo1, topo1);
    const Topology b = build_topology(16, 4, geo2, topo2);
    REQUIRE(a.adjacency == b.adjacency);
    for (NodeId v = 0; v < 16; ++v) {
        REQUIRE(a.locations[v].latitude == b.locations[v].latitude);
        REQUIRE(a.locations[v].longitude == b.locations[v].longitude);
    }
}

namespace {

std::map<NodeId, double> run_gossip(const Topology& topo, NodeId origin, double size_mb,
                                    std::uint64_t seed) {
    SimEngine engine;
    RandomStream bw(seed, "bandwidth");
    GossipNet gossip(engine, topo, bw);
    std::map<NodeId, double> first;
    gossip.set_first_receipt([&first](NodeId node, std::uint64_t, double time, NodeId) {
        REQUIRE(first.count(node) == 0);  // exactly one first receipt per node
        first[node] = time;
    });
    engine.set_handler([&gossip](const SimEvent& ev) { gossip.on_event(ev); });
    gossip.publish(origin, size_mb, 0.0, 1);
    engine.run_until(1e9);
    return first;
}

} // namespace

TEST_CASE("gossip on a two-node topology reaches the peer once") {
    RandomStream geo(3, "geography"), topo_stream(3, "topology");
    Topology t = build_topology(2, 1, geo, topo_stream);
    t.bandwidth_std_mbps = 0.0;
    const auto first = run_gossip(t, 0, 1.0, 1);
    REQUIRE(first.size() == 2);
    REQUIRE(first.at(0) == 0.0);
    NetMessage msg{0, 1, 1.0, NetMsgType::Gossip};
    RandomStream bw_check(99, "bandwidth");
    REQUIRE_THAT(first.at(1),
                 Catch::Matchers::WithinRel(transfer_time(msg, t.link(0, 1), bw_check), 1e-12));
}

TEST_CASE("gossip floods the baseline topology exactly once per node") {
    RandomStream geo(11, "geography"), topo_stream(11, "topology");
    const Topology t = build_topology(32, 16, geo, topo_stream);
    const auto first = run_gossip(t, 5, 0.25, 2);
    REQUIRE(first.size() == 32);  // flood reachability on a connected graph
}

TEST_CASE("gossip reaches every node on random connected topologies") {
    // Flood-reachability oracle over assorted shapes and origins.
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        RandomStream shape(seed, "shape");
        const std::size_t n = 4 + shape.next_below(12);             // 4..15 nodes
        const std::size_t k = 2 + shape.next_below(2);              // 2..3 peers
        if ((n * k) % 2 != 0) {
            continue;
        }
        RandomStream geo(seed, "geography"), topo_stream(seed, "topology");
        const Topology t = build_topology(n, k, geo, topo_stream);
        const NodeId origin = static_cast<NodeId>(shape.next_below(n));
        const auto first = run_gossip(t, origin, 0.1, seed);
        REQUIRE(first.size() == n);
    }
}
