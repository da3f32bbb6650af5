#pragma once

// Management-chain agreement: CBI scheduling, proposal cycles with timeout,
// twin-driven proposal and validation, and commitment of configuration
// blocks. Cycles are synchronized by equal-length windows anchored at the
// trigger: cycle r spans [trigger + r*timeout, trigger + (r+1)*timeout).

#include "chainsim/chain_core.hpp"
#include "chainsim/consensus.hpp"
#include "chainsim/net_model.hpp"
#include "chainsim/sim_engine.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace chainsim {

// Read-only system view handed to a twin when it proposes.
struct TwinSnapshot {
    const Configuration* active_config = nullptr;
    double clock = 0.0;
    std::uint64_t proposal_height = 0;
    std::vector<double> recent_block_intervals;
};

// Stakeholder decision logic. The simulation only needs the interface; the
// baseline policies below keep the produced configurations inert.
struct TwinPolicy {
    std::function<Configuration(const TwinSnapshot&)> propose;
    std::function<bool(const Configuration&)> validate;
};

// Always proposes the scenario's fixed configuration and validates only a
// byte-identical configuration.
inline TwinPolicy constant_twin(Configuration fixed) {
    auto shared = std::make_shared<Configuration>(std::move(fixed));
    TwinPolicy twin;
    twin.propose = [shared](const TwinSnapshot&) { return *shared; };
    twin.validate = [shared](const Configuration& c) { return c == *shared; };
    return twin;
}

// Proposes the fixed configuration with an extra `epoch` key equal to the
// proposal height, so every committed configuration differs byte-wise while
// staying behaviorally identical. Used to exercise real switches.
inline TwinPolicy changing_twin(Configuration base) {
    auto shared = std::make_shared<Configuration>(std::move(base));
    TwinPolicy twin;
    twin.propose = [shared](const TwinSnapshot& snap) {
        Configuration c = *shared;
        c.values["epoch"] = static_cast<std::int64_t>(snap.proposal_height);
        return c;
    };
    twin.validate = [shared](const Configuration& c) {
        Configuration stripped = c;
        stripped.values.erase("epoch");
        return stripped == *shared;
    };
    return twin;
}

struct ManagementNode {
    NodeId id = 0;
    TwinPolicy twin;
    bool online = true;
};

struct CbiSchedule {
    double mean_s = 30.0;
    double std_s = 5.0;
    double next_trigger = 0.0;
    double last_sample = 0.0;
};

// trigger = last_commit + max(1 s, N(mean, std)); the sampled interval is
// kept so the minimum-interval property can be audited per gap.
inline double schedule_cbi(SimEngine& engine, double last_commit, CbiSchedule& sched,
                           RandomStream& stream) {
    sched.last_sample = sample_normal(stream, sched.mean_s, sched.std_s, 1.0);
    sched.next_trigger = last_commit + sched.last_sample;
    engine.schedule(sched.next_trigger, kSystemNode, EventKind::CbiTrigger);
    return sched.next_trigger;
}

// Structural validity of a proposed configuration block against a chain tip.
// Proposals carry no proof yet, so this is the pre-vote subset of the append
// checks.
inline bool structurally_valid(const ConfigurationBlock& cb, const ConfigurationBlock& tip) {
    return cb.height == tip.height + 1 && cb.prev_hash == tip.hash &&
           cb.hash == hash_block(cb.prev_hash, cb.proposer, cb.config, cb.height) &&
           cb.config.well_formed();
}

// Algorithm "validate configuration included in CB_r and cast appropriate
// vote": structural validity for the node's tip, matching cycle, and the
// node's twin accepting the configuration.
inline bool validate_proposal(const ManagementNode& node, const ConfigurationBlock& cb,
                              std::uint16_t proposal_cycle, std::uint16_t current_cycle,
                              const ConfigurationBlock& tip) {
    if (!node.online || proposal_cycle != current_cycle) {
        return false;
    }
    return structurally_valid(cb, tip) && node.twin.validate(cb.config);
}

struct AgreementResult {
    bool committed = false;
    std::uint64_t height = 0;
    std::uint16_t cycles_used = 0;  // FC of the committing cycle, or |MN| on failure
    double trigger_time = 0.0;
    double end_time = 0.0;
};

// One agreement process per CBI trigger, up to |MN| proposal cycles.
class AgreementDriver {
public:
    struct Params {
        double cycle_timeout_s = 5.0;
        double config_block_size_mb = 0.25;
        double vote_size_mb = 0.001;
    };

    struct Hooks {
        // Committed configuration block appended to the chain; gossip and the
        // next CBI are the owner's responsibility.
        std::function<void(const ConfigurationBlock&, const AgreementResult&)> on_commit;
        std::function<void(const AgreementResult&)> on_failed;
        // Trace hook for committed-proposer audits.
        std::function<void(std::uint16_t cycle, NodeId proposer)> on_cycle_start;
    };

    AgreementDriver(SimEngine& engine, const Topology& topo, RandomStream& bw_stream,
                    ChainPair& chain, std::vector<ManagementNode>& nodes, Params params,
                    Hooks hooks)
        : m_engine(&engine),
          m_topo(&topo),
          m_bw(&bw_stream),
          m_chain(&chain),
          m_nodes(&nodes),
          m_params(params),
          m_hooks(std::move(hooks)) {
        m_validator_ids.reserve(nodes.size());
        for (const ManagementNode& n : nodes) {
            m_validator_ids.push_back(n.id);
        }
    }

    const std::vector<NodeId>& validators() const noexcept { return m_validator_ids; }
    bool in_progress() const noexcept { return m_active; }

    // Begins the agreement for one CBI trigger; the trigger time must equal
    // the current clock.
    void start(double trigger_time, std::vector<double> recent_intervals = {}) {
        m_trigger = trigger_time;
        m_fc = 0;
        m_active = true;
        m_recent_intervals = std::move(recent_intervals);
        start_cycle(0);
    }

    bool on_event(const SimEvent& ev) {
        if (ev.kind == EventKind::CycleTimeout && ev.payload.b == kMgmtTimeoutTag) {
            if (m_active && ev.payload.cycle == m_fc) {
                on_cycle_timeout(ev.time);
            }
            return true;
        }
        if (ev.kind == EventKind::MessageDelivery &&
            ev.payload.type >= static_cast<std::uint16_t>(RoundMsg::Proposal) &&
            ev.payload.type <= static_cast<std::uint16_t>(RoundMsg::Commit) &&
            static_cast<ChainTag>(ev.payload.b) == ChainTag::Management) {
            if (m_round) {
                m_round->on_event(ev);  // stale-cycle traffic falls through and is dropped
            }
            return true;
        }
        return false;
    }

private:
    static constexpr std::uint64_t kMgmtTimeoutTag = 0x4d474d54;  // routing tag

    ManagementNode& node_by_id(NodeId id) {
        for (ManagementNode& n : *m_nodes) {
            if (n.id == id) {
                return n;
            }
        }
        throw SimError(ErrorCode::InvalidValue, "unknown management node");
    }

    void start_cycle(std::uint16_t cycle) {
        m_fc = cycle;
        const ConfigurationBlock& tip = m_chain->management.back();
        const std::uint32_t idx =
            select_proposer(tip.hash, cycle, static_cast<std::uint32_t>(m_validator_ids.size()));
        const NodeId proposer_id = m_validator_ids[idx];
        ManagementNode& proposer = node_by_id(proposer_id);
        if (m_hooks.on_cycle_start) {
            m_hooks.on_cycle_start(cycle, proposer_id);
        }

        const double now = m_engine->clock();
        EventPayload timeout_payload;
        timeout_payload.cycle = cycle;
        timeout_payload.b = kMgmtTimeoutTag;
        m_timeout_ev = m_engine->schedule(now + m_params.cycle_timeout_s, kSystemNode,
                                          EventKind::CycleTimeout, timeout_payload);

        m_round.reset();
        if (!proposer.online) {
            return;  // validators wait for the proposal until the cycle timeout
        }

        TwinSnapshot snap;
        snap.active_config = &tip.config;
        snap.clock = now;
        snap.proposal_height = tip.height + 1;
        snap.recent_block_intervals = m_recent_intervals;
        ConfigurationBlock cb =
            make_config_block(tip.hash, proposer_id, proposer.twin.propose(snap), tip.height + 1);

        RoundState state(ChainTag::Management, cb.height, cycle, m_validator_ids);
        state.block_digest = cb.hash;
        RoundDriver::Hooks hooks;
        hooks.online = [this](NodeId v) { return node_by_id(v).online; };
        hooks.accept = [this, cb](NodeId v, double) {
            return validate_proposal(node_by_id(v), cb, m_fc, m_fc, m_chain->management.back())
                       ? AcceptVerdict::Accept
                       : AcceptVerdict::Reject;
        };
        hooks.on_commit = [this, cb](const RoundOutcome& outcome) { finish_committed(cb, outcome); };
        m_round = std::make_unique<RoundDriver>(*m_engine, *m_topo, *m_bw, std::move(state),
                                                m_params.config_block_size_mb,
                                                m_params.vote_size_mb, hooks);
        m_round->propose(proposer_id, now);
    }

    void finish_committed(ConfigurationBlock cb, const RoundOutcome& outcome) {
        cb.proof = outcome.proof;
        cb.commit_time = outcome.commit_time;
        append_config_block(*m_chain, cb, m_validator_ids);
        m_engine->cancel(m_timeout_ev);
        m_active = false;

        AgreementResult result;
        result.committed = true;
        result.height = cb.height;
        result.cycles_used = m_fc;
        result.trigger_time = m_trigger;
        result.end_time = outcome.commit_time;
        if (m_hooks.on_commit) {
            m_hooks.on_commit(m_chain->management.back(), result);
        }
    }

    // Cycle timeout without commitment: FC += 1, next cycle, or agreement
    // failure once every validator has had a turn.
    void on_cycle_timeout(double now) {
        if (m_round) {
            m_round->conclude_failed();
        }
        const auto cycles = static_cast<std::uint16_t>(m_fc + 1);
        if (cycles >= m_validator_ids.size()) {
            m_active = false;
            AgreementResult result;
            result.committed = false;
            result.height = m_chain->management.back().height + 1;
            result.cycles_used = cycles;
            result.trigger_time = m_trigger;
            result.end_time = now;
            if (m_hooks.on_failed) {
                m_hooks.on_failed(result);
            }
            return;
        }
        start_cycle(cycles);
    }

    SimEngine* m_engine;
    const Topology* m_topo;
    RandomStream* m_bw;
    ChainPair* m_chain;
    std::vector<ManagementNode>* m_nodes;
    Params m_params;
    Hooks m_hooks;

    std::vector<NodeId> m_validator_ids;
    std::vector<double> m_recent_intervals;
    std::unique_ptr<RoundDriver> m_round;
    EventId m_timeout_ev = 0;
    double m_trigger = 0.0;
    std::uint16_t m_fc = 0;
    bool m_active = false;
};

} // namespace chainsim
