#pragma once

// Peer-to-peer topology, geography-derived latency, per-message bandwidth
// sampling, point-to-point transfer timing and gossip dissemination.

#include "chainsim/errors.hpp"
#include "chainsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

namespace chainsim {

struct GeoLocation {
    double latitude = 0.0;   // degrees, [-90, 90]
    double longitude = 0.0;  // degrees, [-180, 180]
};

// Great-circle distance on a sphere of radius 6371 km.
inline double haversine_km(const GeoLocation& a, const GeoLocation& b) {
    constexpr double kEarthRadiusKm = 6371.0;
    constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
    const double lat1 = a.latitude * kDegToRad;
    const double lat2 = b.latitude * kDegToRad;
    const double dlat = (b.latitude - a.latitude) * kDegToRad;
    const double dlon = (b.longitude - a.longitude) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

// Affine latency stand-in: a fixed per-hop term plus distance over signal
// speed (defaults approximate long-haul fiber). Both are scenario parameters.
struct LatencyModel {
    double base_latency_s = 0.005;
    double signal_speed_km_s = 200000.0;

    double operator()(double distance_km) const {
        return base_latency_s + distance_km / signal_speed_km_s;
    }
};

struct Link {
    NodeId a = 0;
    NodeId b = 0;
    double bandwidth_mean_mbps = 10.0;  // MB/s
    double bandwidth_std_mbps = 0.5;    // MB/s
    double latency_s = 0.0;             // fixed per link, from distance
};

enum class NetMsgType : std::uint16_t {
    Block,
    Vote,
    BlockRequest,
    BlockResponse,
    Gossip,
};

struct NetMessage {
    NodeId src = 0;
    NodeId dst = 0;
    double size_mb = 0.0;
    NetMsgType type = NetMsgType::Gossip;
};

struct Topology {
    std::vector<GeoLocation> locations;          // by node id
    std::vector<std::vector<NodeId>> adjacency;  // sorted peer lists
    double bandwidth_mean_mbps = 10.0;
    double bandwidth_std_mbps = 0.5;
    LatencyModel latency_model{};

    std::size_t node_count() const noexcept { return locations.size(); }

    bool connected(NodeId a, NodeId b) const {
        const auto& peers = adjacency[a];
        return std::binary_search(peers.begin(), peers.end(), b);
    }

    // Link between any node pair. Non-adjacent pairs get an on-demand direct
    // link with the same bandwidth model and geography-derived latency; the
    // consensus traffic of the management nodes travels on such links.
    Link link(NodeId a, NodeId b) const {
        Link l;
        l.a = a;
        l.b = b;
        l.bandwidth_mean_mbps = bandwidth_mean_mbps;
        l.bandwidth_std_mbps = bandwidth_std_mbps;
        l.latency_s = latency_model(haversine_km(locations[a], locations[b]));
        return l;
    }
};

// size / sampled-bandwidth + propagation latency. Bandwidth is sampled per
// message and clamped at 1% of the mean so degenerate draws stay physical.
inline double transfer_time(const NetMessage& msg, const Link& link, RandomStream& bw_stream) {
    const double floor = 0.01 * link.bandwidth_mean_mbps;
    const double bw = sample_normal(bw_stream, link.bandwidth_mean_mbps, link.bandwidth_std_mbps, floor);
    return msg.size_mb / bw + link.latency_s;
}

namespace detail {

inline bool graph_connected(const std::vector<std::vector<NodeId>>& adj) {
    if (adj.empty()) {
        return true;
    }
    std::vector<char> seen(adj.size(), 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        for (const NodeId w : adj[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == adj.size();
}

// Random k-regular simple graph: a connected circulant start, then
// degree-preserving random edge swaps. Swaps that would create a self-loop
// or a parallel edge are skipped, so the graph stays simple throughout.
inline bool try_regular_graph(std::size_t n, std::size_t k, RandomStream& stream,
                              std::vector<std::vector<NodeId>>& adj) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<std::vector<char>> have(n, std::vector<char>(n, 0));
    auto add_edge = [&](std::size_t a, std::size_t b) {
        edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
        have[a][b] = have[b][a] = 1;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 1; d <= k / 2; ++d) {
            const std::size_t j = (i + d) % n;
            if (!have[i][j]) {
                add_edge(i, j);
            }
        }
    }
    if (k % 2 == 1) {
        // Odd degree forces an even node count; pair up antipodes.
        for (std::size_t i = 0; i < n / 2; ++i) {
            add_edge(i, i + n / 2);
        }
    }

    const std::size_t swaps = 10 * edges.size();
    for (std::size_t s = 0; s < swaps; ++s) {
        const std::size_t i = static_cast<std::size_t>(stream.next_below(edges.size()));
        const std::size_t j = static_cast<std::size_t>(stream.next_below(edges.size()));
        if (i == j) {
            continue;
        }
        auto [a, b] = edges[i];
        auto [c, d] = edges[j];
        if (stream.next_below(2)) {
            std::swap(c, d);
        }
        // (a,b),(c,d) -> (a,d),(c,b)
        if (a == d || c == b || have[a][d] || have[c][b]) {
            continue;
        }
        have[a][b] = have[b][a] = 0;
        have[c][d] = have[d][c] = 0;
        have[a][d] = have[d][a] = 1;
        have[c][b] = have[b][c] = 1;
        edges[i] = {a, d};
        edges[j] = {c, b};
    }

    adj.assign(n, {});
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& peers : adj) {
        std::sort(peers.begin(), peers.end());
    }
    return true;
}

} // namespace detail

// Connected k-regular topology with uniformly sampled locations
// (lat in [-60, 60], lon in [-180, 180]). Geography comes from geo_stream and
// wiring from topo_stream so sweeps can vary one without disturbing the other.
inline Topology build_topology(std::size_t node_count, std::size_t peers_per_node,
                               RandomStream& geo_stream, RandomStream& topo_stream) {
    if (node_count <= peers_per_node || peers_per_node < 1) {
        throw SimError(ErrorCode::InvalidValue, "need node_count > peers_per_node >= 1");
    }
    if ((node_count * peers_per_node) % 2 != 0) {
        throw SimError(ErrorCode::TopologyInfeasible,
                       "no " + std::to_string(peers_per_node) + "-regular graph on " +
                           std::to_string(node_count) + " nodes (odd stub count)");
    }

    Topology topo;
    topo.locations.resize(node_count);
    for (auto& loc : topo.locations) {
        loc.latitude = geo_stream.next_range(-60.0, 60.0);
        loc.longitude = geo_stream.next_range(-180.0, 180.0);
    }

    constexpr int kRetryBudget = 1000;
    for (int attempt = 0; attempt < kRetryBudget; ++attempt) {
        if (!detail::try_regular_graph(node_count, peers_per_node, topo_stream, topo.adjacency)) {
            continue;
        }
        if (detail::graph_connected(topo.adjacency)) {
            return topo;
        }
    }
    throw SimError(ErrorCode::TopologyInfeasible, "no connected regular graph within retry budget");
}

// Flooding dissemination: the origin sends to all its peers; every node
// forwards a payload to all peers except the sender on first receipt and
// drops duplicates afterwards.
class GossipNet {
public:
    // first_receipt(node, payload_id, time, sender) is invoked exactly once
    // per node per payload, in delivery order.
    using FirstReceipt = std::function<void(NodeId, std::uint64_t, double, NodeId)>;

    GossipNet(SimEngine& engine, const Topology& topo, RandomStream& bw_stream)
        : m_engine(&engine), m_topo(&topo), m_bw(&bw_stream) {}

    void set_first_receipt(FirstReceipt cb) { m_on_first = std::move(cb); }

    // Injects a payload at the origin at `time` (>= clock). The origin itself
    // counts as having received it at that moment.
    std::uint64_t publish(NodeId origin, double size_mb, double time, std::uint64_t payload_id) {
        auto& seen = m_seen[payload_id];
        seen.assign(m_topo->node_count(), 0);
        EventPayload p;
        p.type = static_cast<std::uint16_t>(NetMsgType::Gossip);
        p.src = origin;
        p.a = payload_id;
        p.x = size_mb;
        m_engine->schedule(time, origin, EventKind::MessageDelivery, p);
        return payload_id;
    }

    // Routes a MessageDelivery event of type Gossip. Returns true when the
    // event belonged to this component.
    bool on_event(const SimEvent& ev) {
        if (ev.kind != EventKind::MessageDelivery ||
            ev.payload.type != static_cast<std::uint16_t>(NetMsgType::Gossip)) {
            return false;
        }
        const std::uint64_t id = ev.payload.a;
        auto it = m_seen.find(id);
        if (it == m_seen.end()) {
            return true;  // payload already retired
        }
        const NodeId node = ev.target;
        const NodeId sender = ev.payload.src;
        if (it->second[node]) {
            return true;  // duplicate receipt dropped
        }
        it->second[node] = 1;
        forward(node, sender == node ? kSystemNode : sender, id, ev.payload.x, ev.time);
        if (m_on_first) {
            m_on_first(node, id, ev.time, sender);
        }
        return true;
    }

    // First-arrival times observed so far for a payload (delivered nodes only).
    std::size_t delivered_count(std::uint64_t payload_id) const {
        auto it = m_seen.find(payload_id);
        if (it == m_seen.end()) {
            return 0;
        }
        return static_cast<std::size_t>(std::count(it->second.begin(), it->second.end(), 1));
    }

    void retire(std::uint64_t payload_id) { m_seen.erase(payload_id); }

private:
    void forward(NodeId node, NodeId skip, std::uint64_t id, double size_mb, double now) {
        for (const NodeId peer : m_topo->adjacency[node]) {
            if (peer == skip) {
                continue;
            }
            NetMessage msg{node, peer, size_mb, NetMsgType::Gossip};
            const double dt = transfer_time(msg, m_topo->link(node, peer), *m_bw);
            EventPayload p;
            p.type = static_cast<std::uint16_t>(NetMsgType::Gossip);
            p.src = node;
            p.a = id;
            p.x = size_mb;
            m_engine->schedule(now + dt, peer, EventKind::MessageDelivery, p);
        }
    }

    SimEngine* m_engine;
    const Topology* m_topo;
    RandomStream* m_bw;
    FirstReceipt m_on_first;
    std::unordered_map<std::uint64_t, std::vector<char>> m_seen;
};

} // namespace chainsim
