#pragma once

// Block types, hashing, the dual-linked chain structure and full-chain
// verification. Configuration blocks govern the primary chain; transaction
// blocks carry a reference to the configuration block they were produced
// under, so the whole history stays individually verifiable.

#include "chainsim/errors.hpp"
#include "chainsim/quorum.hpp"
#include "chainsim/sha256.hpp"
#include "chainsim/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace chainsim {

// Fixed serialization overhead of a transaction block, in MB.
inline constexpr double kBlockHeaderMb = 0.001;

using ConfigValue = std::variant<std::int64_t, double, std::string, std::vector<NodeId>>;

// Reconfigurable parameter set applied to the primary chain. Keys are kept
// sorted (std::map) so the canonical serialization, and therefore the hash,
// is stable. Required keys: block_size_limit, block_interval, validator_set.
struct Configuration {
    std::map<std::string, ConfigValue> values;

    double block_size_limit_mb() const { return get_double("block_size_limit"); }
    double block_interval_s() const { return get_double("block_interval"); }

    const std::vector<NodeId>& validator_set() const {
        auto it = values.find("validator_set");
        if (it == values.end() || !std::holds_alternative<std::vector<NodeId>>(it->second)) {
            throw SimError(ErrorCode::InvalidValue, "configuration lacks validator_set");
        }
        return std::get<std::vector<NodeId>>(it->second);
    }

    bool well_formed() const {
        try {
            return block_size_limit_mb() > 0.0 && block_interval_s() > 0.0 &&
                   !validator_set().empty();
        } catch (const SimError&) {
            return false;
        }
    }

    // key=value lines, keys in lexicographic order, numbers in shortest
    // round-trip form. This is the hash preimage contribution of C.
    std::string canonical() const {
        std::string out;
        for (const auto& [key, value] : values) {
            out += key;
            out += '=';
            out += render(value);
            out += '\n';
        }
        return out;
    }

    bool operator==(const Configuration& other) const { return canonical() == other.canonical(); }

    static std::string render(const ConfigValue& value) {
        struct {
            std::string operator()(std::int64_t v) const { return std::to_string(v); }
            std::string operator()(double v) const {
                char buf[32];
                auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
                return std::string(buf, end);
            }
            std::string operator()(const std::string& v) const { return v; }
            std::string operator()(const std::vector<NodeId>& v) const {
                std::string s;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    if (i) {
                        s += ',';
                    }
                    s += std::to_string(v[i]);
                }
                return s;
            }
        } r;
        return std::visit(r, value);
    }

private:
    double get_double(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) {
            throw SimError(ErrorCode::InvalidValue, "configuration lacks " + key);
        }
        if (const auto* d = std::get_if<double>(&it->second)) {
            return *d;
        }
        if (const auto* i = std::get_if<std::int64_t>(&it->second)) {
            return static_cast<double>(*i);
        }
        throw SimError(ErrorCode::InvalidValue, key + " is not numeric");
    }
};

struct Attestation {
    NodeId node = 0;
    Digest digest{};
};

struct ConfigurationBlock {
    Digest hash{};
    Digest prev_hash{};
    NodeId proposer = kSystemNode;
    Configuration config;
    std::vector<Attestation> proof;  // excluded from the hash preimage
    std::uint64_t height = 0;
    double commit_time = 0.0;        // excluded from the hash preimage
};

struct Transaction {
    std::uint64_t id = 0;
    double size_mb = 0.0;
    double arrival_time = 0.0;
};

struct TransactionBlock {
    Digest hash{};
    Digest prev_hash{};
    Digest config_ref{};  // configuration block governing this block
    NodeId proposer = kSystemNode;
    std::vector<Transaction> transactions;
    double size_mb = 0.0;       // sum of transaction sizes + header overhead
    std::uint64_t height = 0;
    double commit_time = 0.0;   // excluded from the hash preimage
};

namespace detail {

inline void put_u64(Sha256& h, std::uint64_t v) {
    std::uint8_t be[8];
    for (int i = 0; i < 8; ++i) {
        be[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    }
    h.update(be, 8);
}

inline void put_double(Sha256& h, double v) {
    std::uint64_t bits;
    __builtin_memcpy(&bits, &v, 8);
    put_u64(h, bits);
}

} // namespace detail

// 256-bit digest over a canonical serialization. Proof and commit time stay
// outside the preimage so validators can attest to a digest before the
// commit time is known.
inline Digest hash_block(const Digest& prev_hash, NodeId proposer, const Configuration& config,
                         std::uint64_t height) {
    Sha256 h;
    h.update("cb/1\n");
    h.update(prev_hash.data(), prev_hash.size());
    detail::put_u64(h, proposer);
    detail::put_u64(h, height);
    h.update(config.canonical());
    return h.digest();
}

inline Digest hash_block(const Digest& prev_hash, const Digest& config_ref, NodeId proposer,
                         std::uint64_t height, const std::vector<Transaction>& txs) {
    Sha256 h;
    h.update("tb/1\n");
    h.update(prev_hash.data(), prev_hash.size());
    h.update(config_ref.data(), config_ref.size());
    detail::put_u64(h, proposer);
    detail::put_u64(h, height);
    detail::put_u64(h, txs.size());
    for (const Transaction& tx : txs) {
        detail::put_u64(h, tx.id);
        detail::put_double(h, tx.size_mb);
        detail::put_double(h, tx.arrival_time);
    }
    return h.digest();
}

inline ConfigurationBlock make_config_block(const Digest& prev_hash, NodeId proposer,
                                            Configuration config, std::uint64_t height) {
    ConfigurationBlock cb;
    cb.prev_hash = prev_hash;
    cb.proposer = proposer;
    cb.config = std::move(config);
    cb.height = height;
    cb.hash = hash_block(cb.prev_hash, cb.proposer, cb.config, cb.height);
    return cb;
}

inline TransactionBlock make_tx_block(const Digest& prev_hash, const Digest& config_ref,
                                      NodeId proposer, std::uint64_t height,
                                      std::vector<Transaction> txs) {
    TransactionBlock tb;
    tb.prev_hash = prev_hash;
    tb.config_ref = config_ref;
    tb.proposer = proposer;
    tb.height = height;
    tb.transactions = std::move(txs);
    tb.size_mb = kBlockHeaderMb;
    for (const Transaction& tx : tb.transactions) {
        tb.size_mb += tx.size_mb;
    }
    tb.hash = hash_block(tb.prev_hash, tb.config_ref, tb.proposer, tb.height, tb.transactions);
    return tb;
}

struct ChainPair {
    std::vector<ConfigurationBlock> management;
    std::vector<TransactionBlock> primary;
};

// Genesis pair carrying the scenario's initial configuration. The genesis
// configuration block is exempt from the quorum-proof rule.
inline ChainPair make_genesis(Configuration initial_config) {
    ChainPair chain;
    chain.management.push_back(make_config_block(Digest{}, kSystemNode, std::move(initial_config), 0));
    chain.primary.push_back(
        make_tx_block(Digest{}, chain.management.front().hash, kSystemNode, 0, {}));
    return chain;
}

inline const ConfigurationBlock& latest_config(const ChainPair& chain) {
    if (chain.management.empty()) {
        throw SimError(ErrorCode::EmptyInput, "management chain has no genesis");
    }
    return chain.management.back();
}

// Structural checks of a configuration block against an arbitrary chain tip;
// shared between the authoritative append and the observers' receive path.
inline void check_config_block(const ConfigurationBlock& cb, const ConfigurationBlock& tip,
                               const std::vector<NodeId>& management_validators) {
    if (cb.height != tip.height + 1) {
        throw SimError(ErrorCode::BadHeight, "expected height " + std::to_string(tip.height + 1) +
                                                 ", got " + std::to_string(cb.height));
    }
    if (cb.prev_hash != tip.hash) {
        throw SimError(ErrorCode::BrokenLink, "prev_hash does not match tip at height " +
                                                  std::to_string(tip.height));
    }
    if (cb.hash != hash_block(cb.prev_hash, cb.proposer, cb.config, cb.height)) {
        throw SimError(ErrorCode::BrokenLink, "stored hash does not match preimage");
    }
    std::set<NodeId> attestors;
    for (const Attestation& at : cb.proof) {
        if (!std::binary_search(management_validators.begin(), management_validators.end(), at.node)) {
            throw SimError(ErrorCode::ForeignAttestor,
                           "attestor " + std::to_string(at.node) + " is not a management validator");
        }
        if (at.digest != cb.hash) {
            throw SimError(ErrorCode::ForeignAttestor,
                           "attestation digest mismatch from node " + std::to_string(at.node));
        }
        attestors.insert(at.node);
    }
    const std::uint32_t quorum = quorum_size(static_cast<std::uint32_t>(management_validators.size()));
    if (attestors.size() < quorum) {
        throw SimError(ErrorCode::InsufficientProof,
                       std::to_string(attestors.size()) + " distinct attestations, quorum is " +
                           std::to_string(quorum));
    }
}

inline void append_config_block(ChainPair& chain, ConfigurationBlock cb,
                                const std::vector<NodeId>& management_validators) {
    check_config_block(cb, latest_config(chain), management_validators);
    chain.management.push_back(std::move(cb));
}

inline void append_tx_block(ChainPair& chain, TransactionBlock tb) {
    if (chain.primary.empty()) {
        throw SimError(ErrorCode::EmptyInput, "primary chain has no genesis");
    }
    const TransactionBlock& tip = chain.primary.back();
    if (tb.height != tip.height + 1) {
        throw SimError(ErrorCode::BadHeight, "expected height " + std::to_string(tip.height + 1) +
                                                 ", got " + std::to_string(tb.height));
    }
    if (tb.prev_hash != tip.hash) {
        throw SimError(ErrorCode::BrokenLink, "prev_hash does not match primary tip");
    }
    const ConfigurationBlock* governing = nullptr;
    for (const ConfigurationBlock& cb : chain.management) {
        if (cb.hash == tb.config_ref) {
            governing = &cb;
            break;
        }
    }
    if (governing == nullptr) {
        throw SimError(ErrorCode::UnknownConfigRef, "config_ref not on the management chain");
    }
    if (tb.size_mb > governing->config.block_size_limit_mb()) {
        throw SimError(ErrorCode::OversizedBlock,
                       std::to_string(tb.size_mb) + " MB exceeds limit " +
                           std::to_string(governing->config.block_size_limit_mb()) + " MB");
    }
    chain.primary.push_back(std::move(tb));
}

struct Violation {
    std::string chain;    // "management" | "primary"
    std::uint64_t height = 0;
    std::string what;
};

struct VerificationReport {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

struct VerifyOptions {
    // Allowed lag between a configuration block's commit and the last
    // transaction block still referencing an older configuration; covers the
    // gossip plus between-rounds activation window.
    double activation_lag_tolerance_s = 10.0;
    // Exported chains carry digests but not the full preimages, so hash
    // recomputation and size/limit checks are skipped for them.
    bool recompute_hashes = true;
};

// Rebuilds both chains block by block and reports every violation found:
// broken hash links, height gaps, missing or foreign quorum proofs, size
// violations and stale configuration references.
inline VerificationReport verify_chains(const ChainPair& chain,
                                        const std::vector<NodeId>& management_validators,
                                        const VerifyOptions& options = {}) {
    VerificationReport report;
    auto flag = [&report](const char* which, std::uint64_t height, std::string what) {
        report.violations.push_back(Violation{which, height, std::move(what)});
    };

    std::vector<NodeId> sorted_validators = management_validators;
    std::sort(sorted_validators.begin(), sorted_validators.end());
    const std::uint32_t quorum = quorum_size(static_cast<std::uint32_t>(sorted_validators.size()));

    for (std::size_t i = 0; i < chain.management.size(); ++i) {
        const ConfigurationBlock& cb = chain.management[i];
        if (cb.height != i) {
            flag("management", cb.height, "height out of sequence");
        }
        if (i > 0) {
            if (cb.prev_hash != chain.management[i - 1].hash) {
                flag("management", cb.height, "prev_hash does not match predecessor");
            }
            if (cb.commit_time < chain.management[i - 1].commit_time) {
                flag("management", cb.height, "commit time decreases");
            }
            std::set<NodeId> attestors;
            for (const Attestation& at : cb.proof) {
                if (!std::binary_search(sorted_validators.begin(), sorted_validators.end(), at.node)) {
                    flag("management", cb.height,
                         "attestor " + std::to_string(at.node) + " not a management validator");
                } else if (options.recompute_hashes && at.digest != cb.hash) {
                    flag("management", cb.height,
                         "attestation digest mismatch from node " + std::to_string(at.node));
                } else {
                    attestors.insert(at.node);
                }
            }
            if (attestors.size() < quorum) {
                flag("management", cb.height,
                     "proof has " + std::to_string(attestors.size()) + " distinct attestors, quorum " +
                         std::to_string(quorum));
            }
        }
        if (options.recompute_hashes) {
            if (cb.hash != hash_block(cb.prev_hash, cb.proposer, cb.config, cb.height)) {
                flag("management", cb.height, "hash does not match preimage");
            }
            if (!cb.config.well_formed()) {
                flag("management", cb.height, "malformed configuration");
            }
        }
    }

    std::map<Digest, std::size_t> cb_by_hash;
    for (std::size_t i = 0; i < chain.management.size(); ++i) {
        cb_by_hash[chain.management[i].hash] = i;
    }

    for (std::size_t i = 0; i < chain.primary.size(); ++i) {
        const TransactionBlock& tb = chain.primary[i];
        if (tb.height != i) {
            flag("primary", tb.height, "height out of sequence");
        }
        if (i > 0) {
            if (tb.prev_hash != chain.primary[i - 1].hash) {
                flag("primary", tb.height, "prev_hash does not match predecessor");
            }
            if (tb.commit_time < chain.primary[i - 1].commit_time) {
                flag("primary", tb.height, "commit time decreases");
            }
        }
        if (options.recompute_hashes &&
            tb.hash != hash_block(tb.prev_hash, tb.config_ref, tb.proposer, tb.height, tb.transactions)) {
            flag("primary", tb.height, "hash does not match preimage");
        }
        auto ref = cb_by_hash.find(tb.config_ref);
        if (ref == cb_by_hash.end()) {
            flag("primary", tb.height, "config_ref not on the management chain");
            continue;
        }
        const ConfigurationBlock& governing = chain.management[ref->second];
        if (governing.commit_time > tb.commit_time) {
            flag("primary", tb.height, "references a configuration committed in its future");
        }
        if (options.recompute_hashes) {
            double expect = kBlockHeaderMb;
            for (const Transaction& tx : tb.transactions) {
                if (tx.size_mb <= 0.0) {
                    flag("primary", tb.height, "non-positive transaction size");
                }
                expect += tx.size_mb;
            }
            if (std::abs(expect - tb.size_mb) > 1e-12) {
                flag("primary", tb.height, "size field does not match transaction sum");
            }
        }
        if (tb.size_mb > governing.config.block_size_limit_mb() && options.recompute_hashes) {
            flag("primary", tb.height, "size exceeds the referenced configuration's limit");
        }
        // Staleness: every configuration block committed more than the
        // activation-lag tolerance before this block must already govern it.
        for (std::size_t j = ref->second + 1; j < chain.management.size(); ++j) {
            if (chain.management[j].commit_time + options.activation_lag_tolerance_s <=
                tb.commit_time) {
                flag("primary", tb.height,
                     "still references height " + std::to_string(ref->second) +
                         " long after configuration " + std::to_string(j) + " committed");
                break;
            }
        }
    }
    return report;
}

} // namespace chainsim
