#pragma once

// Measurement pipeline: management-delay decomposition on the fastest 2f+1
// nodes, and reconfiguration-overhead classification of inter-block
// intervals. Pure post-processing over immutable run artifacts.

#include "chainsim/chain_core.hpp"
#include "chainsim/quorum.hpp"
#include "chainsim/sim_engine.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace chainsim {

// Per-node delay decomposition for one configuration block:
//   agreement   = commit - trigger        (management consensus)
//   propagation = first_arrival - commit  (gossip to the primary overlay)
//   update      = activation - arrival    (between-rounds activation)
struct NodeDelay {
    NodeId node = 0;
    double first_arrival = 0.0;
    double activation = 0.0;

    double propagation(double commit_time) const { return first_arrival - commit_time; }
    double update() const { return activation - first_arrival; }
};

struct DelayRecord {
    std::uint64_t cb_height = 0;
    double trigger_time = 0.0;
    double commit_time = 0.0;
    std::vector<NodeDelay> per_node;
    bool complete = false;  // every primary node activated before the horizon

    double agreement() const { return commit_time - trigger_time; }
};

struct IntervalRecord {
    std::uint64_t height = 0;
    double interval_s = 0.0;
    bool is_switch = false;
};

struct QuantileSummary {
    std::size_t count = 0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double mean = 0.0;

    double iqr() const { return q3 - q1; }
};

// Ranking choice for the fastest-quorum truncation; the activation endpoint
// is the default, arrival is the plausible alternative.
enum class FastestRankBy : std::uint8_t { Activation, Arrival };

inline const char* to_string(FastestRankBy rank) noexcept {
    return rank == FastestRankBy::Activation ? "activation" : "arrival";
}

// Keeps the quorum_size(n_primary) per-node entries with the smallest
// ranking time; ties break by node id.
inline DelayRecord fastest_quorum(const DelayRecord& record, std::uint32_t n_primary,
                                  FastestRankBy rank_by = FastestRankBy::Activation) {
    DelayRecord out = record;
    const std::uint32_t keep = quorum_size(n_primary);
    auto key = [rank_by](const NodeDelay& d) {
        return rank_by == FastestRankBy::Activation ? d.activation : d.first_arrival;
    };
    std::sort(out.per_node.begin(), out.per_node.end(), [&](const NodeDelay& a, const NodeDelay& b) {
        if (key(a) != key(b)) {
            return key(a) < key(b);
        }
        return a.node < b.node;
    });
    if (out.per_node.size() > keep) {
        out.per_node.resize(keep);
    }
    return out;
}

// One record per block at height >= 1; a switch block references a different
// configuration block than its predecessor.
inline std::vector<IntervalRecord> classify_intervals(const std::vector<TransactionBlock>& primary) {
    std::vector<IntervalRecord> records;
    for (std::size_t i = 1; i < primary.size(); ++i) {
        IntervalRecord r;
        r.height = primary[i].height;
        r.interval_s = primary[i].commit_time - primary[i - 1].commit_time;
        r.is_switch = primary[i].config_ref != primary[i - 1].config_ref;
        records.push_back(r);
    }
    return records;
}

// Five-number summary plus mean. Quantiles interpolate linearly on the
// sorted values (position q*(n-1)), which reduces to the midpoint convention
// for the median of an even count.
inline QuantileSummary summarize(std::vector<double> values) {
    if (values.empty()) {
        throw SimError(ErrorCode::EmptyInput, "summarize of an empty list");
    }
    std::sort(values.begin(), values.end());
    auto at = [&values](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    QuantileSummary s;
    s.count = values.size();
    s.min = values.front();
    s.q1 = at(0.25);
    s.median = at(0.5);
    s.q3 = at(0.75);
    s.max = values.back();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

// Reconfiguration overhead as (mean difference, median difference) between
// switch-block and normal-block inter-block intervals.
inline std::pair<double, double> overhead(const QuantileSummary& switch_summary,
                                          const QuantileSummary& normal_summary) {
    return {switch_summary.mean - normal_summary.mean,
            switch_summary.median - normal_summary.median};
}

// Pooled per-node samples across the usable (complete, pre-horizon-margin)
// delay records.
struct DelaySamples {
    std::vector<double> agreement;
    std::vector<double> propagation;
    std::vector<double> update;
    std::vector<double> total;
};

inline DelaySamples pool_delay_samples(const std::vector<DelayRecord>& records) {
    DelaySamples s;
    for (const DelayRecord& rec : records) {
        for (const NodeDelay& nd : rec.per_node) {
            s.agreement.push_back(rec.agreement());
            s.propagation.push_back(nd.propagation(rec.commit_time));
            s.update.push_back(nd.update());
            s.total.push_back(rec.agreement() + nd.propagation(rec.commit_time) + nd.update());
        }
    }
    return s;
}

} // namespace chainsim
