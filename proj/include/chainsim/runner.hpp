#pragma once

// Full-run orchestration: topology and membership setup, the management
// agreement loop, configuration-block gossip to the primary overlay,
// primary-chain block production under the active configuration, workload,
// and the audit/metrics records the acceptance checks consume.

#include "chainsim/chain_core.hpp"
#include "chainsim/consensus.hpp"
#include "chainsim/metrics.hpp"
#include "chainsim/mgmt_chain.hpp"
#include "chainsim/net_model.hpp"
#include "chainsim/primary_node.hpp"
#include "chainsim/quorum.hpp"
#include "chainsim/scenario.hpp"
#include "chainsim/sim_engine.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace chainsim {

struct RunParams {
    Scenario scenario;
    FastestRankBy rank_by = FastestRankBy::Activation;
    // Configuration blocks committed within this margin of the horizon are
    // excluded from delay summaries (censoring guard).
    double summary_horizon_margin_s = 60.0;
    double activation_lag_tolerance_s = 10.0;
    bool collect_audits = true;
};

// Step-ordered audit records; `step` is a run-global monotonic counter so
// same-timestamp orderings stay provable.
struct RoundWindowAudit {
    NodeId node = 0;
    std::uint64_t height = 0;
    std::uint16_t cycle = 0;
    std::uint64_t start_step = 0;
    std::uint64_t end_step = 0;
    double start_time = 0.0;
    double end_time = 0.0;
    bool open = false;  // still in the round at the horizon
};

struct ActivationAudit {
    NodeId node = 0;
    std::uint64_t cb_height = 0;
    std::uint64_t step = 0;
    double time = 0.0;
};

struct AgreementAudit {
    double trigger_time = 0.0;
    bool committed = false;
    std::uint16_t cycles_used = 0;
    std::uint64_t cb_height = 0;
    NodeId proposer = kSystemNode;
    bool proposer_online = false;
    double cbi_sample = 0.0;  // the sample that produced this trigger
};

struct RunResult {
    Scenario scenario;
    ChainPair chain;
    Topology topology;
    std::vector<NodeId> mgmt_validators;

    std::vector<DelayRecord> delays;  // complete records only, fastest-quorum truncated
    std::uint64_t incomplete_cbs = 0;
    std::vector<IntervalRecord> intervals;

    std::uint64_t trace_hash = 0;
    std::uint64_t event_count = 0;
    std::uint32_t agreement_failures = 0;
    VerificationReport verification;
    FastestRankBy rank_by = FastestRankBy::Activation;
    double activation_lag_tolerance_s = 10.0;
    double summary_horizon_margin_s = 60.0;

    // Audits (populated when RunParams::collect_audits).
    std::vector<RoundWindowAudit> round_windows;
    std::vector<ActivationAudit> activations;
    std::vector<AgreementAudit> agreements;
    // Distinct digests observed as locally committed, per (chain, height).
    std::map<std::pair<int, std::uint64_t>, std::set<Digest>> committed_digests;
};

namespace detail {

inline constexpr std::uint64_t kPrimaryTimeoutTag = 0x50524d54;

struct NodeRuntime {
    PrimaryNodeState obs;
    std::uint64_t tip = 0;  // primary-chain tip this node has committed
    Digest tip_hash{};
    // Current round participation.
    std::uint64_t round_height = 0;
    std::uint16_t round_cycle = 0;
    double round_entered = 0.0;
    std::uint64_t round_start_step = 0;
    EventId deadline_ev = 0;
    // Proposal seen while one block behind; redelivered after catching up.
    std::optional<std::pair<std::uint64_t, std::uint16_t>> deferred;
};

struct TxPool {
    std::vector<Transaction> txs;
    std::size_t consumed = 0;  // committed prefix
    std::size_t visible = 0;   // txs with arrival + delta <= now
    double visibility_delay = 0.0;

    void advance(double now) {
        while (visible < txs.size() && txs[visible].arrival_time + visibility_delay <= now) {
            ++visible;
        }
    }

    std::span<const Transaction> candidates(double now) {
        advance(now);
        return {txs.data() + consumed, visible - consumed};
    }
};

struct PendingDelay {
    std::uint64_t cb_height = 0;
    double trigger_time = 0.0;
    double commit_time = 0.0;
    std::vector<double> arrival;     // -1 until first receipt
    std::vector<double> activation;  // -1 until activated
};

class SimulationRun {
public:
    explicit SimulationRun(RunParams params) : m_params(std::move(params)) {
        m_params.scenario.validate();
    }

    RunResult run() {
        setup();
        m_engine.run_until(m_params.scenario.duration_s);
        return finalize();
    }

private:
    // ---- setup -----------------------------------------------------------

    void setup() {
        const Scenario& scn = m_params.scenario;
        m_geo = RandomStream(scn.seed, "geography");
        m_topo_stream = RandomStream(scn.seed, "topology");
        m_bw = RandomStream(scn.seed, "bandwidth");
        m_cbi_stream = RandomStream(scn.seed, "cbi");
        m_workload = RandomStream(scn.seed, "workload");
        m_membership = RandomStream(scn.seed, "membership");
        m_sync = RandomStream(scn.seed, "sync");

        m_topology = build_topology(scn.primary_nodes, scn.peers_per_node, m_geo, m_topo_stream);
        m_topology.bandwidth_mean_mbps = scn.bandwidth_mean_mbps;
        m_topology.bandwidth_std_mbps = scn.bandwidth_std_mbps;
        m_topology.latency_model = LatencyModel{scn.base_latency_s, scn.signal_speed_km_s};

        // Initial configuration: the scenario's primary-chain parameters.
        Configuration initial;
        initial.values["block_size_limit"] = scn.tx_block_size_limit_mb;
        initial.values["block_interval"] = scn.block_interval_s;
        std::vector<NodeId> all_nodes(scn.primary_nodes);
        for (NodeId i = 0; i < scn.primary_nodes; ++i) {
            all_nodes[i] = i;
        }
        initial.values["validator_set"] = all_nodes;
        m_chain = make_genesis(initial);

        // Management membership: drawn from the primary nodes, sorted.
        std::vector<NodeId> draw = all_nodes;
        for (std::size_t i = draw.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(m_membership.next_below(i + 1));
            std::swap(draw[i], draw[j]);
        }
        draw.resize(scn.mgmt_nodes);
        std::sort(draw.begin(), draw.end());

        std::set<NodeId> offline;
        if (scn.offline_mgmt_nodes.explicit_ids) {
            for (const NodeId id : *scn.offline_mgmt_nodes.explicit_ids) {
                if (!std::binary_search(draw.begin(), draw.end(), id)) {
                    throw SimError(ErrorCode::InvalidValue,
                                   "offline node " + std::to_string(id) +
                                       " is not a drawn management node");
                }
                offline.insert(id);
            }
        } else {
            for (std::uint32_t i = 0; i < scn.offline_mgmt_nodes.count; ++i) {
                offline.insert(draw[i]);
            }
        }

        const TwinPolicy twin = scn.twin_policy == TwinPolicyKind::Constant
                                    ? constant_twin(initial)
                                    : changing_twin(initial);
        for (const NodeId id : draw) {
            ManagementNode node;
            node.id = id;
            node.twin = twin;
            node.online = offline.count(id) == 0;
            m_mgmt_nodes.push_back(std::move(node));
        }
        m_mgmt_validators = draw;

        auto genesis_cb = std::make_shared<const ConfigurationBlock>(m_chain.management.front());
        m_nodes.clear();
        for (NodeId i = 0; i < scn.primary_nodes; ++i) {
            NodeRuntime rt;
            rt.obs = PrimaryNodeState::with_genesis(i, genesis_cb);
            rt.tip = 0;
            rt.tip_hash = m_chain.primary.front().hash;
            m_nodes.push_back(std::move(rt));
        }

        m_gossip = std::make_unique<GossipNet>(m_engine, m_topology, m_bw);
        m_gossip->set_first_receipt([this](NodeId node, std::uint64_t cb_height, double time,
                                           NodeId sender) {
            on_cb_first_receipt(node, cb_height, time, sender);
        });

        AgreementDriver::Params aparams;
        aparams.cycle_timeout_s = scn.cycle_timeout_s;
        aparams.config_block_size_mb = scn.config_block_size_mb;
        aparams.vote_size_mb = scn.vote_size_mb;
        AgreementDriver::Hooks ahooks;
        ahooks.on_commit = [this](const ConfigurationBlock& cb, const AgreementResult& result) {
            on_agreement_commit(cb, result);
        };
        ahooks.on_failed = [this](const AgreementResult& result) { on_agreement_failed(result); };
        m_agreement = std::make_unique<AgreementDriver>(m_engine, m_topology, m_bw, m_chain,
                                                        m_mgmt_nodes, aparams, ahooks);

        m_cbi.mean_s = scn.cbi_mean_s;
        m_cbi.std_s = scn.cbi_std_s;

        // Transaction visibility: arrivals enter every mempool after a fixed
        // two-hop dissemination allowance instead of per-transaction flood
        // events (the flood would dominate the event budget without altering
        // block content in any measured way).
        m_pool.visibility_delay = tx_visibility_delay();

        m_engine.set_handler([this](const SimEvent& ev) { dispatch(ev); });

        schedule_cbi(m_engine, 0.0, m_cbi, m_cbi_stream);
        if (scn.tx_rate_per_s > 0.0) {
            m_engine.schedule(m_workload.next_exponential(scn.tx_rate_per_s), kSystemNode,
                              EventKind::TxArrival);
        }
        schedule_block_due(proposer_for(m_chain.primary.back().hash, 0), scn.block_interval_s, 1, 0);
    }

    double tx_visibility_delay() const {
        std::vector<double> distances;
        for (NodeId a = 0; a < m_topology.node_count(); ++a) {
            for (NodeId b = a + 1; b < m_topology.node_count(); ++b) {
                distances.push_back(haversine_km(m_topology.locations[a], m_topology.locations[b]));
            }
        }
        std::sort(distances.begin(), distances.end());
        const double median = distances.empty() ? 0.0 : distances[distances.size() / 2];
        const double hop = m_topology.latency_model(median) +
                           m_params.scenario.tx_size_mb / m_params.scenario.bandwidth_mean_mbps;
        return 2.0 * hop;
    }

    NodeId proposer_for(const Digest& tip_hash, std::uint64_t failed_cycles) const {
        const auto& validators = m_chain.management[0].config.validator_set();
        return validators[select_proposer(tip_hash, failed_cycles,
                                          static_cast<std::uint32_t>(validators.size()))];
    }

    // ---- event dispatch --------------------------------------------------

    void dispatch(const SimEvent& ev) {
        switch (ev.kind) {
            case EventKind::TxArrival: on_tx_arrival(ev); return;
            case EventKind::CbiTrigger: on_cbi_trigger(ev); return;
            case EventKind::BlockProposalDue: on_block_due(ev); return;
            case EventKind::ConfigActivation: on_config_activation(ev); return;
            case EventKind::CycleTimeout:
                if (ev.payload.b == kPrimaryTimeoutTag) {
                    on_primary_deadline(ev);
                } else {
                    m_agreement->on_event(ev);
                }
                return;
            case EventKind::MessageDelivery: break;
        }
        if (m_gossip->on_event(ev)) {
            return;
        }
        const auto type = ev.payload.type;
        if (type == static_cast<std::uint16_t>(NetMsgType::BlockRequest)) {
            on_block_request(ev);
            return;
        }
        if (type == static_cast<std::uint16_t>(NetMsgType::BlockResponse)) {
            on_block_response_msg(ev);
            return;
        }
        if (static_cast<ChainTag>(ev.payload.b) == ChainTag::Management) {
            m_agreement->on_event(ev);
            return;
        }
        // Primary-round consensus traffic. The local reference keeps the
        // driver alive even if its own commit path prunes the registry.
        auto it = m_primary_rounds.find(round_key(ev.payload.a, ev.payload.cycle));
        if (it != m_primary_rounds.end()) {
            const std::shared_ptr<RoundDriver> keep = it->second;
            keep->on_event(ev);
        }
    }

    // ---- workload ----------------------------------------------------------

    void on_tx_arrival(const SimEvent& ev) {
        Transaction tx;
        tx.id = ++m_next_tx_id;
        tx.size_mb = m_params.scenario.tx_size_mb;
        tx.arrival_time = ev.time;
        m_pool.txs.push_back(tx);
        m_engine.schedule(ev.time + m_workload.next_exponential(m_params.scenario.tx_rate_per_s),
                          kSystemNode, EventKind::TxArrival);
    }

    // ---- management chain --------------------------------------------------

    void on_cbi_trigger(const SimEvent& ev) {
        std::vector<double> recent;
        const auto& primary = m_chain.primary;
        for (std::size_t i = primary.size() > 5 ? primary.size() - 5 : 1; i < primary.size(); ++i) {
            recent.push_back(primary[i].commit_time - primary[i - 1].commit_time);
        }
        m_agreement->start(ev.time, std::move(recent));
    }

    void on_agreement_commit(const ConfigurationBlock& cb, const AgreementResult& result) {
        if (m_params.collect_audits) {
            AgreementAudit audit;
            audit.trigger_time = result.trigger_time;
            audit.committed = true;
            audit.cycles_used = result.cycles_used;
            audit.cb_height = cb.height;
            audit.proposer = cb.proposer;
            audit.proposer_online = true;
            for (const ManagementNode& n : m_mgmt_nodes) {
                if (n.id == cb.proposer) {
                    audit.proposer_online = n.online;
                }
            }
            audit.cbi_sample = m_cbi.last_sample;
            m_audit_agreements.push_back(audit);
        }

        PendingDelay delay;
        delay.cb_height = cb.height;
        delay.trigger_time = result.trigger_time;
        delay.commit_time = cb.commit_time;
        delay.arrival.assign(m_nodes.size(), -1.0);
        delay.activation.assign(m_nodes.size(), -1.0);
        m_pending_delays.emplace(cb.height, std::move(delay));

        m_shared_cbs.emplace(cb.height, std::make_shared<const ConfigurationBlock>(cb));
        // The proposer injects the committed block into the primary overlay.
        m_gossip->publish(cb.proposer, m_params.scenario.config_block_size_mb, cb.commit_time,
                          cb.height);

        schedule_cbi(m_engine, cb.commit_time, m_cbi, m_cbi_stream);
    }

    void on_agreement_failed(const AgreementResult& result) {
        ++m_agreement_failures;
        if (m_params.collect_audits) {
            AgreementAudit audit;
            audit.trigger_time = result.trigger_time;
            audit.committed = false;
            audit.cycles_used = result.cycles_used;
            audit.cb_height = result.height;
            audit.cbi_sample = m_cbi.last_sample;
            m_audit_agreements.push_back(audit);
        }
        // The previous configuration stays active; try again after a fresh
        // interval from the failure time.
        schedule_cbi(m_engine, result.end_time, m_cbi, m_cbi_stream);
    }

    // ---- configuration-block dissemination ---------------------------------

    void on_cb_first_receipt(NodeId node_id, std::uint64_t cb_height, double time, NodeId sender) {
        NodeRuntime& rt = m_nodes[node_id];
        auto cb_it = m_shared_cbs.find(cb_height);
        if (cb_it == m_shared_cbs.end()) {
            return;
        }
        record_arrival(cb_height, node_id, time);
        const CbReceiveActions actions =
            on_receive_config_block(rt.obs, cb_it->second, time, m_mgmt_validators);
        if (actions.request) {
            send_block_request(node_id, sender == node_id ? random_peer(node_id) : sender,
                               actions.request->first, actions.request->second, time);
        }
        after_observer_append(rt, actions.appended_heights, time);
    }

    void send_block_request(NodeId from, NodeId to, std::uint64_t first, std::uint64_t last,
                            double now) {
        NetMessage msg{from, to, m_params.scenario.vote_size_mb, NetMsgType::BlockRequest};
        EventPayload p;
        p.type = static_cast<std::uint16_t>(NetMsgType::BlockRequest);
        p.src = from;
        p.a = first;
        p.b = last;
        p.x = msg.size_mb;
        m_engine.schedule(now + transfer_time(msg, m_topology.link(from, to), m_bw), to,
                          EventKind::MessageDelivery, p);
    }

    NodeId random_peer(NodeId node) {
        const auto& peers = m_topology.adjacency[node];
        return peers[static_cast<std::size_t>(m_sync.next_below(peers.size()))];
    }

    void on_block_request(const SimEvent& ev) {
        const NodeId server = ev.target;
        const NodeId requester = ev.payload.src;
        const std::uint64_t first = ev.payload.a;
        const std::uint64_t last = ev.payload.b;
        if (first > last) {
            return;
        }
        EventPayload p;
        p.type = static_cast<std::uint16_t>(NetMsgType::BlockResponse);
        p.src = server;
        p.a = first;
        double size = m_params.scenario.vote_size_mb;
        try {
            const auto blocks = serve_block_request(m_nodes[server].obs, first, last);
            size = static_cast<double>(blocks.size()) * m_params.scenario.config_block_size_mb;
            p.b = last + 1;  // exclusive end marks a block-carrying response
        } catch (const SimError& e) {
            if (e.code() != ErrorCode::UnknownRange) {
                throw;
            }
            p.b = 0;  // UnknownRange: requester retries with a random peer
        }
        p.x = size;
        NetMessage msg{server, requester, size, NetMsgType::BlockResponse};
        m_engine.schedule(ev.time + transfer_time(msg, m_topology.link(server, requester), m_bw),
                          requester, EventKind::MessageDelivery, p);
    }

    void on_block_response_msg(const SimEvent& ev) {
        NodeRuntime& rt = m_nodes[ev.target];
        if (ev.payload.b == 0) {
            // UnknownRange response: retry the gap with a random peer.
            if (rt.obs.mgmt_tip() + 1 <= ev.payload.a && !rt.obs.pending_blocks.empty()) {
                send_block_request(ev.target, random_peer(ev.target), rt.obs.mgmt_tip() + 1,
                                   rt.obs.pending_blocks.begin()->first - 1, ev.time);
            }
            return;
        }
        std::vector<CbRef> blocks;
        for (std::uint64_t h = ev.payload.a; h < ev.payload.b; ++h) {
            auto it = m_shared_cbs.find(h);
            if (it != m_shared_cbs.end()) {
                record_arrival(h, ev.target, ev.time);
                blocks.push_back(it->second);
            }
        }
        const auto appended = on_block_response(rt.obs, blocks, ev.time);
        after_observer_append(rt, appended, ev.time);
    }

    void after_observer_append(NodeRuntime& rt, const std::vector<std::uint64_t>& appended,
                               double now) {
        if (appended.empty()) {
            return;
        }
        if (!rt.obs.in_round && rt.obs.mgmt_tip() > rt.obs.active_config_height) {
            EventPayload p;
            m_engine.schedule(now, rt.obs.id, EventKind::ConfigActivation, p);
        }
    }

    void on_config_activation(const SimEvent& ev) {
        apply_activations(m_nodes[ev.target], ev.time);
    }

    void apply_activations(NodeRuntime& rt, double now) {
        for (const ActivationRecord& rec : apply_pending_configs(rt.obs, now)) {
            ++m_step;
            record_activation(rec.cb_height, rt.obs.id, now);
            if (m_params.collect_audits) {
                m_audit_activations.push_back(
                    ActivationAudit{rt.obs.id, rec.cb_height, m_step, now});
            }
        }
    }

    void record_arrival(std::uint64_t cb_height, NodeId node, double time) {
        auto it = m_pending_delays.find(cb_height);
        if (it != m_pending_delays.end() && it->second.arrival[node] < 0.0) {
            it->second.arrival[node] = time;
        }
    }

    void record_activation(std::uint64_t cb_height, NodeId node, double time) {
        auto it = m_pending_delays.find(cb_height);
        if (it != m_pending_delays.end() && it->second.activation[node] < 0.0) {
            it->second.activation[node] = time;
        }
    }

    // ---- primary chain ------------------------------------------------------

    static std::uint64_t round_key(std::uint64_t height, std::uint16_t cycle) {
        return (height << 16) | cycle;
    }

    void schedule_block_due(NodeId proposer, double time, std::uint64_t height, std::uint16_t cycle) {
        EventPayload p;
        p.a = height;
        p.cycle = cycle;
        m_engine.schedule(time, proposer, EventKind::BlockProposalDue, p);
    }

    void on_block_due(const SimEvent& ev) {
        const std::uint64_t height = ev.payload.a;
        NodeRuntime& rt = m_nodes[ev.target];
        if (rt.tip + 1 != height || m_chain.primary.back().height + 1 != height) {
            return;  // superseded while the event was in flight
        }
        propose_primary(rt, height, ev.payload.cycle, ev.time);
    }

    void propose_primary(NodeRuntime& rt, std::uint64_t height, std::uint16_t cycle, double now) {
        auto [block, consumed] = produce_block(rt.obs, rt.tip_hash, height,
                                               m_pool.candidates(now));
        auto shared = std::make_shared<TransactionBlock>(std::move(block));
        m_attempt_consumed[round_key(height, cycle)] = consumed;

        const std::vector<NodeId>& validators = rt.obs.active_config_block().config.validator_set();
        RoundState state(ChainTag::Primary, height, cycle, validators);
        state.block_digest = shared->hash;

        RoundDriver::Hooks hooks;
        hooks.accept = [this, shared, cycle](NodeId v, double when) {
            return primary_accept(*shared, cycle, v, when);
        };
        hooks.on_enter = [this, height, cycle](NodeId v, double when) {
            primary_enter(v, height, cycle, when);
        };
        hooks.on_node_committed = [this, shared, height](NodeId v, double when) {
            primary_node_committed(*shared, v, height, when);
        };
        hooks.on_commit = [this, shared, height, cycle](const RoundOutcome& outcome) {
            primary_global_commit(*shared, height, cycle, outcome);
        };
        auto driver = std::make_shared<RoundDriver>(
            m_engine, m_topology, m_bw, std::move(state), shared->size_mb,
            m_params.scenario.vote_size_mb, std::move(hooks));
        m_primary_rounds[round_key(height, cycle)] = driver;
        driver->propose(rt.obs.id, now);
    }

    AcceptVerdict primary_accept(const TransactionBlock& block, std::uint16_t cycle, NodeId v,
                                 double now) {
        NodeRuntime& rt = m_nodes[v];
        if (rt.tip >= block.height) {
            return AcceptVerdict::Defer;  // stale proposal; never acted on
        }
        if (rt.tip + 1 < block.height) {
            rt.deferred = std::make_pair(block.height, cycle);
            return AcceptVerdict::Defer;  // one block behind; redelivered on catch-up
        }
        // Fast-forward: a proposal for a later cycle implies the current one
        // failed; activation happens in the gap between the two rounds.
        if (rt.obs.in_round && rt.round_height == block.height) {
            if (cycle <= rt.round_cycle) {
                return AcceptVerdict::Defer;  // stale cycle
            }
            end_round_participation(rt, now, true);
            apply_activations(rt, now);
        }
        if (block.prev_hash != rt.tip_hash) {
            return AcceptVerdict::Reject;
        }
        return validate_tx_block(rt.obs, block) ? AcceptVerdict::Accept : AcceptVerdict::Reject;
    }

    std::uint16_t current_cycle_of(std::uint64_t height) const {
        std::uint16_t cycle = 0;
        for (const auto& [key, driver] : m_primary_rounds) {
            if (driver->state().height == height) {
                cycle = std::max(cycle, driver->state().cycle);
            }
        }
        return cycle;
    }

    void primary_enter(NodeId v, std::uint64_t height, std::uint16_t cycle, double now) {
        NodeRuntime& rt = m_nodes[v];
        rt.obs.in_round = true;
        rt.round_height = height;
        rt.round_cycle = cycle;
        rt.round_entered = now;
        rt.round_start_step = ++m_step;
        EventPayload p;
        p.a = height;
        p.cycle = cycle;
        p.b = kPrimaryTimeoutTag;
        rt.deadline_ev = m_engine.schedule(now + m_params.scenario.cycle_timeout_s, v,
                                           EventKind::CycleTimeout, p);
    }

    void end_round_participation(NodeRuntime& rt, double now, bool exited) {
        if (!rt.obs.in_round) {
            return;
        }
        m_engine.cancel(rt.deadline_ev);
        if (exited) {
            auto it = m_primary_rounds.find(round_key(rt.round_height, rt.round_cycle));
            if (it != m_primary_rounds.end()) {
                it->second->exit_validator(rt.obs.id);
            }
        }
        rt.obs.in_round = false;
        ++m_step;
        if (m_params.collect_audits) {
            m_audit_windows.push_back(RoundWindowAudit{rt.obs.id, rt.round_height, rt.round_cycle,
                                                       rt.round_start_step, m_step,
                                                       rt.round_entered, now, false});
        }
    }

    void primary_node_committed(const TransactionBlock& block, NodeId v, std::uint64_t height,
                                double now) {
        NodeRuntime& rt = m_nodes[v];
        if (m_params.collect_audits) {
            m_result_committed[{1, height}].insert(block.hash);
        }
        if (rt.tip >= height) {
            return;
        }
        rt.tip = height;
        rt.tip_hash = block.hash;
        if (rt.obs.in_round && rt.round_height == height) {
            end_round_participation(rt, now, false);
        }
        apply_activations(rt, now);

        // Next proposal: rotation by the committed block's hash, no earlier
        // than one block interval after the global commit. When the local
        // commit precedes the global record (it counts toward the quorum),
        // the due is scheduled from primary_global_commit instead.
        if (m_chain.primary.size() > height && m_chain.primary[height].hash == block.hash) {
            maybe_schedule_next_due(rt, height, now);
        } else {
            m_due_waiters.push_back(v);
        }
        if (rt.deferred && rt.deferred->first == rt.tip + 1) {
            const auto [def_height, def_cycle] = *rt.deferred;
            rt.deferred.reset();
            auto it = m_primary_rounds.find(round_key(def_height, def_cycle));
            if (it != m_primary_rounds.end() && !it->second->concluded()) {
                it->second->redeliver_proposal(v, now);
            } else {
                // The deferred cycle already failed; step into the retry
                // rotation so a lagging rotation proposer cannot stall the
                // chain.
                const auto next_cycle = static_cast<std::uint16_t>(def_cycle + 1);
                if (proposer_for(rt.tip_hash, next_cycle) == v &&
                    current_cycle_of(def_height) < next_cycle &&
                    m_chain.primary.back().height + 1 == def_height) {
                    propose_primary(rt, def_height, next_cycle, now);
                }
            }
        }
    }

    void maybe_schedule_next_due(NodeRuntime& rt, std::uint64_t height, double now) {
        const TransactionBlock& committed = m_chain.primary[height];
        const NodeId next = proposer_for(committed.hash, 0);
        if (next != rt.obs.id) {
            return;
        }
        const double due = std::max(now, committed.commit_time +
                                             rt.obs.active_config_block().config.block_interval_s());
        schedule_block_due(next, due, height + 1, 0);
    }

    void primary_global_commit(const TransactionBlock& block, std::uint64_t height,
                               std::uint16_t cycle, const RoundOutcome& outcome) {
        TransactionBlock committed = block;
        committed.commit_time = outcome.commit_time;
        append_tx_block(m_chain, std::move(committed));
        m_pool.consumed += m_attempt_consumed[round_key(height, cycle)];
        // Nodes that committed locally before the global record existed.
        for (const NodeId v : m_due_waiters) {
            NodeRuntime& rt = m_nodes[v];
            if (rt.tip == height) {
                maybe_schedule_next_due(rt, height, outcome.commit_time);
            }
        }
        m_due_waiters.clear();
        prune_primary_rounds();
    }

    void on_primary_deadline(const SimEvent& ev) {
        NodeRuntime& rt = m_nodes[ev.target];
        const std::uint64_t height = ev.payload.a;
        const std::uint16_t cycle = ev.payload.cycle;
        if (!rt.obs.in_round || rt.round_height != height || rt.round_cycle != cycle) {
            return;
        }
        end_round_participation(rt, ev.time, true);
        apply_activations(rt, ev.time);
        if (rt.tip + 1 != height) {
            return;  // caught up past this height meanwhile
        }
        // Retry with the rotated proposer; every validator computes the same
        // rotation from the shared predecessor hash.
        const std::uint16_t next_cycle = cycle + 1;
        const NodeId retry = proposer_for(rt.tip_hash, next_cycle);
        if (retry != rt.obs.id) {
            return;
        }
        if (current_cycle_of(height) >= next_cycle) {
            return;  // someone already started this cycle
        }
        propose_primary(rt, height, next_cycle, ev.time);
    }

    void prune_primary_rounds() {
        std::uint64_t min_tip = std::numeric_limits<std::uint64_t>::max();
        for (const NodeRuntime& rt : m_nodes) {
            min_tip = std::min(min_tip, rt.tip);
        }
        for (auto it = m_primary_rounds.begin(); it != m_primary_rounds.end();) {
            if (it->second->state().height <= min_tip) {
                m_attempt_consumed.erase(it->first);
                it = m_primary_rounds.erase(it);
            } else {
                ++it;
            }
        }
    }

    // ---- finalization -------------------------------------------------------

    RunResult finalize() {
        RunResult result;
        result.scenario = m_params.scenario;
        result.topology = m_topology;
        result.mgmt_validators = m_mgmt_validators;
        result.trace_hash = m_engine.trace_hash();
        result.event_count = m_engine.processed_count();
        result.agreement_failures = m_agreement_failures;
        result.rank_by = m_params.rank_by;
        result.activation_lag_tolerance_s = m_params.activation_lag_tolerance_s;
        result.summary_horizon_margin_s = m_params.summary_horizon_margin_s;

        const std::uint32_t n = m_params.scenario.primary_nodes;
        for (auto& [height, pending] : m_pending_delays) {
            DelayRecord rec;
            rec.cb_height = pending.cb_height;
            rec.trigger_time = pending.trigger_time;
            rec.commit_time = pending.commit_time;
            std::uint32_t have = 0;
            for (NodeId v = 0; v < n; ++v) {
                if (pending.arrival[v] >= 0.0 && pending.activation[v] >= 0.0) {
                    rec.per_node.push_back(NodeDelay{v, pending.arrival[v], pending.activation[v]});
                    ++have;
                }
            }
            rec.complete = have == n;
            if (rec.complete) {
                result.delays.push_back(fastest_quorum(rec, n, m_params.rank_by));
            } else {
                ++result.incomplete_cbs;
            }
        }

        result.intervals = classify_intervals(m_chain.primary);
        VerifyOptions vopts;
        vopts.activation_lag_tolerance_s = m_params.activation_lag_tolerance_s;
        result.verification = verify_chains(m_chain, m_mgmt_validators, vopts);
        result.chain = std::move(m_chain);

        if (m_params.collect_audits) {
            result.round_windows = std::move(m_audit_windows);
            for (NodeRuntime& rt : m_nodes) {
                if (rt.obs.in_round) {
                    result.round_windows.push_back(
                        RoundWindowAudit{rt.obs.id, rt.round_height, rt.round_cycle,
                                         rt.round_start_step, m_step + 1, rt.round_entered,
                                         m_params.scenario.duration_s, true});
                }
            }
            result.activations = std::move(m_audit_activations);
            result.agreements = std::move(m_audit_agreements);
            result.committed_digests = std::move(m_result_committed);
        }
        return result;
    }

    RunParams m_params;
    SimEngine m_engine;
    RandomStream m_geo, m_topo_stream, m_bw, m_cbi_stream, m_workload, m_membership, m_sync;
    Topology m_topology;
    ChainPair m_chain;
    std::vector<ManagementNode> m_mgmt_nodes;
    std::vector<NodeId> m_mgmt_validators;
    std::vector<NodeRuntime> m_nodes;
    std::unique_ptr<GossipNet> m_gossip;
    std::unique_ptr<AgreementDriver> m_agreement;
    CbiSchedule m_cbi;
    TxPool m_pool;
    std::uint64_t m_next_tx_id = 0;

    std::map<std::uint64_t, std::shared_ptr<RoundDriver>> m_primary_rounds;
    std::map<std::uint64_t, std::size_t> m_attempt_consumed;
    std::vector<NodeId> m_due_waiters;
    std::map<std::uint64_t, CbRef> m_shared_cbs;
    std::map<std::uint64_t, PendingDelay> m_pending_delays;

    std::uint64_t m_step = 0;
    std::uint32_t m_agreement_failures = 0;
    std::vector<RoundWindowAudit> m_audit_windows;
    std::vector<ActivationAudit> m_audit_activations;
    std::vector<AgreementAudit> m_audit_agreements;
    std::map<std::pair<int, std::uint64_t>, std::set<Digest>> m_result_committed;
};

} // namespace detail

inline RunResult run_scenario(RunParams params) {
    detail::SimulationRun run(std::move(params));
    return run.run();
}

} // namespace chainsim
