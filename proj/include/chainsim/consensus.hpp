#pragma once

// PBFT-style round timing model shared by both chains, plus the
// deterministic hash-rotation proposer rule. Rounds are modeled at message
// granularity: propose, prepare, commit, each message individually timed on
// the network model. There is no view-change sub-protocol; a failed round is
// detected by its cycle timeout and retried under a rotated proposer.

#include "chainsim/chain_core.hpp"
#include "chainsim/net_model.hpp"
#include "chainsim/quorum.hpp"
#include "chainsim/sha256.hpp"
#include "chainsim/sim_engine.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace chainsim {

// (h_l + FC) mod n over the low 64 bits of the latest block hash
// (big-endian). For fixed h_l and n, FC = 0..n-1 enumerates every validator
// exactly once, so a live quorum member always gets to propose.
inline std::uint32_t select_proposer(const Digest& latest_hash, std::uint64_t failed_cycles,
                                     std::uint32_t validator_count) {
    if (validator_count < 1) {
        throw SimError(ErrorCode::InvalidValue, "validator count must be >= 1");
    }
    const std::uint64_t base = digest_low64(latest_hash) % validator_count;
    return static_cast<std::uint32_t>((base + failed_cycles % validator_count) % validator_count);
}

enum class RoundPhase : std::uint8_t { ProposalSent, Preparing, Committing, Committed, Failed };

enum class ChainTag : std::uint8_t { Management, Primary };

inline const char* to_string(ChainTag tag) noexcept {
    return tag == ChainTag::Management ? "management" : "primary";
}

struct RoundOutcome {
    bool committed = false;
    double commit_time = 0.0;                       // quorum-th local commit
    std::vector<Attestation> proof;                 // first quorum of committers
    std::vector<std::pair<NodeId, double>> commit_time_per_node;
};

// Per-validator view of one (chain, height, cycle) round. Validator indices
// are positions in the round's validator list, capped at 64 so vote sets fit
// a bitmask.
struct RoundState {
    ChainTag chain_tag = ChainTag::Management;
    std::uint64_t height = 0;
    std::uint16_t cycle = 0;
    NodeId proposer = kSystemNode;
    std::vector<NodeId> validators;
    Digest block_digest{};

    std::vector<std::uint64_t> prepares;  // per validator index: mask of seen prepare senders
    std::vector<std::uint64_t> commits;   // per validator index: mask of seen commit senders
    std::vector<char> sent_prepare;
    std::vector<char> sent_commit;
    std::vector<char> committed;
    std::vector<char> entered;            // proposal seen (or sent)
    std::vector<char> exited;             // timed out or moved to a later cycle
    RoundOutcome outcome;
    std::uint32_t committed_count = 0;
    bool concluded = false;

    explicit RoundState(ChainTag tag, std::uint64_t h, std::uint16_t c, std::vector<NodeId> v)
        : chain_tag(tag), height(h), cycle(c), validators(std::move(v)) {
        if (validators.size() > 64) {
            throw SimError(ErrorCode::InvalidValue, "more than 64 validators per round");
        }
        const std::size_t n = validators.size();
        prepares.assign(n, 0);
        commits.assign(n, 0);
        sent_prepare.assign(n, 0);
        sent_commit.assign(n, 0);
        committed.assign(n, 0);
        entered.assign(n, 0);
        exited.assign(n, 0);
    }

    std::optional<std::uint32_t> index_of(NodeId node) const {
        for (std::uint32_t i = 0; i < validators.size(); ++i) {
            if (validators[i] == node) {
                return i;
            }
        }
        return std::nullopt;
    }
};

// Message tags carried in EventPayload::type for consensus traffic.
enum class RoundMsg : std::uint16_t {
    Proposal = 16,
    Prepare = 17,
    Commit = 18,
};

// Drives one consensus round over the event engine. The owner decides who
// proposes, which validators accept the proposal (twin validation or
// configuration checks), and what to do on conclusion; the driver owns the
// three-phase message schedule and the vote bookkeeping.
enum class AcceptVerdict : std::int8_t {
    Defer = -1,  // validator is behind its chain tip; redeliver later
    Reject = 0,  // enters the round but casts no prepare
    Accept = 1,
};

class RoundDriver {
public:
    struct Hooks {
        // Vote decision at proposal arrival (twin validation, configuration
        // reference check, tip check). Unset means Accept.
        std::function<AcceptVerdict(NodeId, double)> accept;
        // online(validator): offline validators neither receive nor send.
        std::function<bool(NodeId)> online;
        // Called once, when the quorum-th validator reaches Committed.
        std::function<void(const RoundOutcome&)> on_commit;
        // Called when a validator enters the round (proposal sent/arrived).
        std::function<void(NodeId, double)> on_enter;
        // Called when a validator locally holds a commit quorum.
        std::function<void(NodeId, double)> on_node_committed;
    };

    RoundDriver(SimEngine& engine, const Topology& topo, RandomStream& bw_stream, RoundState state,
                double block_size_mb, double vote_size_mb, Hooks hooks)
        : m_engine(&engine),
          m_topo(&topo),
          m_bw(&bw_stream),
          m_state(std::move(state)),
          m_block_size(block_size_mb),
          m_vote_size(vote_size_mb),
          m_hooks(std::move(hooks)) {}

    const RoundState& state() const noexcept { return m_state; }
    RoundState& state() noexcept { return m_state; }

    // Proposer broadcasts the block to every other validator; its own
    // prepare is implied by the proposal and broadcast alongside it.
    void propose(NodeId proposer, double now) {
        m_state.proposer = proposer;
        const auto self = m_state.index_of(proposer);
        if (!self) {
            throw SimError(ErrorCode::InvalidValue, "proposer is not a round validator");
        }
        m_state.entered[*self] = 1;
        if (m_hooks.on_enter) {
            m_hooks.on_enter(proposer, now);
        }
        for (std::uint32_t i = 0; i < m_state.validators.size(); ++i) {
            if (i == *self) {
                continue;
            }
            send(proposer, m_state.validators[i], RoundMsg::Proposal, m_block_size, now);
        }
        record_prepare(*self, *self);
        broadcast_vote(proposer, RoundMsg::Prepare, now);
        m_state.sent_prepare[*self] = 1;
        check_thresholds(*self, now);
    }

    // Routes a consensus MessageDelivery event for this round's height and
    // cycle. Returns false if the payload belongs to someone else.
    bool on_event(const SimEvent& ev) {
        if (ev.kind != EventKind::MessageDelivery) {
            return false;
        }
        const auto type = static_cast<RoundMsg>(ev.payload.type);
        if (type != RoundMsg::Proposal && type != RoundMsg::Prepare && type != RoundMsg::Commit) {
            return false;
        }
        if (ev.payload.a != m_state.height || ev.payload.cycle != m_state.cycle ||
            static_cast<ChainTag>(ev.payload.b) != m_state.chain_tag) {
            return false;
        }
        if (m_state.concluded && !m_state.outcome.committed) {
            return true;  // failed cycle: remaining traffic is void
        }
        if (m_hooks.online && !m_hooks.online(ev.target)) {
            return true;  // delivered to an offline node: dropped
        }
        const auto to = m_state.index_of(ev.target);
        const auto from = m_state.index_of(ev.payload.src);
        if (!to || !from || m_state.exited[*to]) {
            return true;
        }
        switch (type) {
            case RoundMsg::Proposal: on_proposal(*to, ev.time); break;
            case RoundMsg::Prepare:
                record_prepare(*to, *from);
                check_thresholds(*to, ev.time);
                break;
            case RoundMsg::Commit:
                record_commit(*to, *from);
                check_thresholds(*to, ev.time);
                break;
        }
        return true;
    }

    // Re-evaluates a proposal whose verdict was Defer (validator had not yet
    // committed the predecessor block when the proposal arrived).
    void redeliver_proposal(NodeId validator, double now) {
        if (m_state.concluded) {
            return;
        }
        if (const auto idx = m_state.index_of(validator); idx && !m_state.exited[*idx]) {
            on_proposal(*idx, now);
        }
    }

    // Marks the round failed (cycle timeout). Late messages are ignored.
    void conclude_failed() {
        if (!m_state.concluded) {
            m_state.concluded = true;
            m_state.outcome.committed = false;
        }
    }

    // Stops vote processing for one validator (per-node timeout or a
    // fast-forward to a later cycle).
    void exit_validator(NodeId validator) {
        if (const auto idx = m_state.index_of(validator)) {
            m_state.exited[*idx] = 1;
        }
    }

    bool concluded() const noexcept { return m_state.concluded; }

private:
    void on_proposal(std::uint32_t to, double now) {
        if (m_state.sent_prepare[to]) {
            return;
        }
        const AcceptVerdict verdict =
            m_hooks.accept ? m_hooks.accept(m_state.validators[to], now) : AcceptVerdict::Accept;
        if (verdict == AcceptVerdict::Defer) {
            return;  // owner redelivers once the validator catches up
        }
        if (!m_state.entered[to]) {
            m_state.entered[to] = 1;
            if (m_hooks.on_enter) {
                m_hooks.on_enter(m_state.validators[to], now);
            }
        }
        if (verdict == AcceptVerdict::Accept) {
            m_state.sent_prepare[to] = 1;
            record_prepare(to, to);
            broadcast_vote(m_state.validators[to], RoundMsg::Prepare, now);
            check_thresholds(to, now);
        }
    }

    void record_prepare(std::uint32_t at, std::uint32_t from) {
        m_state.prepares[at] |= (1ull << from);
    }

    void record_commit(std::uint32_t at, std::uint32_t from) { m_state.commits[at] |= (1ull << from); }

    void check_thresholds(std::uint32_t at, double now) {
        const auto quorum = quorum_size(static_cast<std::uint32_t>(m_state.validators.size()));
        if (!m_state.sent_commit[at] && m_state.sent_prepare[at] &&
            popcount(m_state.prepares[at]) >= quorum) {
            m_state.sent_commit[at] = 1;
            record_commit(at, at);
            broadcast_vote(m_state.validators[at], RoundMsg::Commit, now);
        }
        if (!m_state.committed[at] && popcount(m_state.commits[at]) >= quorum) {
            m_state.committed[at] = 1;
            ++m_state.committed_count;
            m_state.outcome.commit_time_per_node.emplace_back(m_state.validators[at], now);
            if (m_hooks.on_node_committed) {
                m_hooks.on_node_committed(m_state.validators[at], now);
            }
            if (m_state.committed_count <= quorum) {
                m_state.outcome.proof.push_back(Attestation{m_state.validators[at], m_state.block_digest});
            }
            if (m_state.committed_count == quorum && !m_state.concluded) {
                m_state.concluded = true;
                m_state.outcome.committed = true;
                m_state.outcome.commit_time = now;
                if (m_hooks.on_commit) {
                    m_hooks.on_commit(m_state.outcome);
                }
            }
        }
    }

    void broadcast_vote(NodeId from, RoundMsg type, double now) {
        if (m_hooks.online && !m_hooks.online(from)) {
            return;
        }
        for (const NodeId v : m_state.validators) {
            if (v == from) {
                continue;
            }
            send(from, v, type, m_vote_size, now);
        }
    }

    void send(NodeId from, NodeId to, RoundMsg type, double size_mb, double now) {
        NetMessage msg{from, to, size_mb,
                       type == RoundMsg::Proposal ? NetMsgType::Block : NetMsgType::Vote};
        const double dt = transfer_time(msg, m_topo->link(from, to), *m_bw);
        EventPayload p;
        p.type = static_cast<std::uint16_t>(type);
        p.cycle = m_state.cycle;
        p.src = from;
        p.a = m_state.height;
        p.b = static_cast<std::uint64_t>(m_state.chain_tag);
        p.x = size_mb;
        m_engine->schedule(now + dt, to, EventKind::MessageDelivery, p);
    }

    static std::uint32_t popcount(std::uint64_t mask) {
        return static_cast<std::uint32_t>(__builtin_popcountll(mask));
    }

    SimEngine* m_engine;
    const Topology* m_topo;
    RandomStream* m_bw;
    RoundState m_state;
    double m_block_size;
    double m_vote_size;
    Hooks m_hooks;
};

} // namespace chainsim
