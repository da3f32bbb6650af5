#pragma once

// Primary-node reconfiguration logic: observer copies of the management
// chain, configuration-block relay and missing-block sync, between-rounds
// activation, and workload-driven transaction block production/validation.

#include "chainsim/chain_core.hpp"
#include "chainsim/quorum.hpp"
#include "chainsim/sim_engine.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace chainsim {

using CbRef = std::shared_ptr<const ConfigurationBlock>;

struct Workload {
    double tx_rate_per_s = 500.0;  // Poisson arrival rate
    double tx_size_mb = 0.002;
};

struct ActivationRecord {
    std::uint64_t cb_height = 0;
    double time = 0.0;
};

struct PrimaryNodeState {
    NodeId id = 0;

    // Observer copy of the management chain, gap-free from genesis, plus the
    // first-arrival time of each block at this node.
    std::vector<CbRef> local_mgmt_chain;
    std::vector<double> arrival_times;

    std::uint64_t active_config_height = 0;  // H_cc
    // Future blocks awaiting gap fill, with their first-arrival times.
    std::map<std::uint64_t, std::pair<CbRef, double>> pending_blocks;
    bool in_round = false;

    std::uint64_t mgmt_tip() const { return local_mgmt_chain.back()->height; }
    const ConfigurationBlock& active_config_block() const {
        return *local_mgmt_chain[active_config_height];
    }

    static PrimaryNodeState with_genesis(NodeId id, CbRef genesis) {
        PrimaryNodeState node;
        node.id = id;
        node.local_mgmt_chain.push_back(std::move(genesis));
        node.arrival_times.push_back(0.0);
        return node;
    }
};

enum class CbDisposition : std::uint8_t { Invalid, Duplicate, Appended, Buffered };

struct CbReceiveActions {
    CbDisposition disposition = CbDisposition::Duplicate;
    bool forward = false;  // first valid receipt: relay to peers except sender
    std::vector<std::uint64_t> appended_heights;
    // Missing-block request [first, last] to send back to the sender.
    std::optional<std::pair<std::uint64_t, std::uint64_t>> request;
};

namespace detail {

inline bool cb_valid_for_observer(const ConfigurationBlock& cb,
                                  const std::vector<NodeId>& management_validators) {
    if (cb.hash != hash_block(cb.prev_hash, cb.proposer, cb.config, cb.height)) {
        return false;
    }
    std::uint64_t distinct = 0;
    std::uint64_t seen_mask = 0;  // validator list is <= 64 wide
    for (const Attestation& at : cb.proof) {
        if (at.digest != cb.hash) {
            return false;
        }
        for (std::size_t i = 0; i < management_validators.size(); ++i) {
            if (management_validators[i] == at.node) {
                if (!(seen_mask & (1ull << i))) {
                    seen_mask |= 1ull << i;
                    ++distinct;
                }
                break;
            }
        }
    }
    return distinct >= quorum_size(static_cast<std::uint32_t>(management_validators.size()));
}

// Appends contiguous pending blocks onto the local chain, preserving the
// first-arrival time recorded when each block was buffered.
inline void drain_pending(PrimaryNodeState& node, std::vector<std::uint64_t>& appended) {
    for (auto it = node.pending_blocks.find(node.mgmt_tip() + 1); it != node.pending_blocks.end();
         it = node.pending_blocks.find(node.mgmt_tip() + 1)) {
        if (it->second.first->prev_hash != node.local_mgmt_chain.back()->hash) {
            break;  // does not extend our chain; leave for a future receipt
        }
        appended.push_back(it->second.first->height);
        node.local_mgmt_chain.push_back(it->second.first);
        node.arrival_times.push_back(it->second.second);
        node.pending_blocks.erase(it);
    }
}

} // namespace detail

// Observer receipt of a gossiped configuration block: drop invalid or
// duplicate blocks, relay first receipts, append blocks that extend the
// local chain, and buffer future blocks while requesting the gap from the
// sender.
inline CbReceiveActions on_receive_config_block(PrimaryNodeState& node, CbRef cb, double now,
                                                const std::vector<NodeId>& management_validators) {
    CbReceiveActions actions;
    if (!detail::cb_valid_for_observer(*cb, management_validators)) {
        actions.disposition = CbDisposition::Invalid;
        return actions;
    }
    const std::uint64_t tip = node.mgmt_tip();
    if (cb->height <= tip || node.pending_blocks.count(cb->height)) {
        actions.disposition = CbDisposition::Duplicate;
        return actions;
    }
    actions.forward = true;
    if (cb->height == tip + 1) {
        if (cb->prev_hash != node.local_mgmt_chain.back()->hash) {
            actions.disposition = CbDisposition::Invalid;
            actions.forward = false;
            return actions;
        }
        actions.disposition = CbDisposition::Appended;
        actions.appended_heights.push_back(cb->height);
        node.local_mgmt_chain.push_back(std::move(cb));
        node.arrival_times.push_back(now);
        detail::drain_pending(node, actions.appended_heights);
        return actions;
    }
    actions.disposition = CbDisposition::Buffered;
    actions.request = std::make_pair(tip + 1, cb->height - 1);
    const std::uint64_t buffered_height = cb->height;
    node.pending_blocks.emplace(buffered_height, std::make_pair(std::move(cb), now));
    return actions;
}

// Responds to a missing-block request with the requested blocks, one message
// worth count * config-block-size. UnknownRange when the tip is short.
inline std::vector<CbRef> serve_block_request(const PrimaryNodeState& node, std::uint64_t first,
                                              std::uint64_t last) {
    std::vector<CbRef> blocks;
    if (first > last) {
        return blocks;  // empty range: nothing scheduled
    }
    if (last > node.mgmt_tip()) {
        throw SimError(ErrorCode::UnknownRange,
                       "height " + std::to_string(last) + " beyond tip " +
                           std::to_string(node.mgmt_tip()));
    }
    for (std::uint64_t h = first; h <= last; ++h) {
        blocks.push_back(node.local_mgmt_chain[h]);
    }
    return blocks;
}

// Ingests a block-response: appends what extends the chain, buffers the rest.
inline std::vector<std::uint64_t> on_block_response(PrimaryNodeState& node,
                                                    std::span<const CbRef> blocks, double now) {
    std::vector<std::uint64_t> appended;
    for (const CbRef& cb : blocks) {
        if (cb->height <= node.mgmt_tip()) {
            continue;
        }
        node.pending_blocks.emplace(cb->height, std::make_pair(cb, now));
    }
    detail::drain_pending(node, appended);
    return appended;
}

// Between-rounds activation: jump the active configuration to the local tip
// and report one activation record per configuration block covered by the
// jumper. No-op while the node is inside a consensus round.
inline std::vector<ActivationRecord> apply_pending_configs(PrimaryNodeState& node, double now) {
    std::vector<ActivationRecord> records;
    if (node.in_round) {
        return records;
    }
    const std::uint64_t tip = node.mgmt_tip();
    while (node.active_config_height < tip) {
        ++node.active_config_height;
        records.push_back(ActivationRecord{node.active_config_height, now});
    }
    return records;
}

// A transaction block is valid for this node iff it references the node's
// active configuration block and respects that configuration's size limit.
inline bool validate_tx_block(const PrimaryNodeState& node, const TransactionBlock& tb) {
    const ConfigurationBlock& active = node.active_config_block();
    return tb.config_ref == active.hash && tb.size_mb <= active.config.block_size_limit_mb();
}

// Greedy in-order fill from the candidate transactions (already filtered for
// visibility) up to the active configuration's size limit. An empty pool
// still yields a header-only block so the block cadence continues.
inline std::pair<TransactionBlock, std::size_t> produce_block(const PrimaryNodeState& node,
                                                              const Digest& prev_hash,
                                                              std::uint64_t height,
                                                              std::span<const Transaction> pool) {
    const ConfigurationBlock& active = node.active_config_block();
    const double limit = active.config.block_size_limit_mb();
    std::vector<Transaction> included;
    double size = kBlockHeaderMb;
    std::size_t consumed = 0;
    for (const Transaction& tx : pool) {
        if (size + tx.size_mb > limit) {
            break;
        }
        size += tx.size_mb;
        included.push_back(tx);
        ++consumed;
    }
    TransactionBlock tb = make_tx_block(prev_hash, active.hash, node.id, height, std::move(included));
    return {std::move(tb), consumed};
}

} // namespace chainsim
