#pragma once

// Run artifacts: chain export, delay/interval tables, topology dump, summary
// and manifest, plus the export-level verifier used by the `verify`
// subcommand. Exported chains carry digests but not full preimages, so the
// export verifier checks linkage, heights, proof counts, reference rules and
// the table digests; the full preimage-level verification runs in-process at
// the end of every run and its result is recorded in the manifest.

#include "chainsim/chain_core.hpp"
#include "chainsim/metrics.hpp"
#include "chainsim/runner.hpp"
#include "chainsim/scenario.hpp"
#include "chainsim/tables.hpp"
#include "chainsim/version.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chainsim {

inline constexpr const char* kChainsFile = "chains.tsv";
inline constexpr const char* kDelaysFile = "delays.tsv";
inline constexpr const char* kIntervalsFile = "intervals.tsv";
inline constexpr const char* kTopologyFile = "topology.tsv";
inline constexpr const char* kSummaryFile = "summary.txt";
inline constexpr const char* kManifestFile = "manifest.txt";
inline constexpr const char* kScenarioFile = "scenario.txt";

inline std::string export_chains(const RunResult& result) {
    TableWriter w({"chain", "height", "hash", "prev_hash", "config_ref", "proposer", "size_mb",
                   "commit_time_s", "proof_count"});
    for (const ConfigurationBlock& cb : result.chain.management) {
        w.row({"management", std::to_string(cb.height), to_hex(cb.hash), to_hex(cb.prev_hash), "",
               std::to_string(cb.proposer), format_double(result.scenario.config_block_size_mb),
               format_double(cb.commit_time), std::to_string(cb.proof.size())});
    }
    for (const TransactionBlock& tb : result.chain.primary) {
        w.row({"primary", std::to_string(tb.height), to_hex(tb.hash), to_hex(tb.prev_hash),
               to_hex(tb.config_ref), std::to_string(tb.proposer), format_double(tb.size_mb),
               format_double(tb.commit_time), "0"});
    }
    return w.finish();
}

inline std::string export_delays(const RunResult& result) {
    TableWriter w({"cb_height", "trigger_s", "commit_s", "agreement_s", "node_id", "propagation_s",
                   "update_s"});
    for (const DelayRecord& rec : result.delays) {
        for (const NodeDelay& nd : rec.per_node) {
            w.row({std::to_string(rec.cb_height), format_double(rec.trigger_time),
                   format_double(rec.commit_time), format_double(rec.agreement()),
                   std::to_string(nd.node), format_double(nd.propagation(rec.commit_time)),
                   format_double(nd.update())});
        }
    }
    return w.finish();
}

inline std::string export_intervals(const RunResult& result) {
    TableWriter w({"height", "interval_s", "is_switch"});
    for (const IntervalRecord& rec : result.intervals) {
        w.row({std::to_string(rec.height), format_double(rec.interval_s),
               rec.is_switch ? "1" : "0"});
    }
    return w.finish();
}

inline std::string export_topology(const RunResult& result) {
    TableWriter w({"node", "latitude", "longitude", "peers"});
    for (NodeId v = 0; v < result.topology.node_count(); ++v) {
        std::string peers;
        for (std::size_t i = 0; i < result.topology.adjacency[v].size(); ++i) {
            if (i) {
                peers += ',';
            }
            peers += std::to_string(result.topology.adjacency[v][i]);
        }
        w.row({std::to_string(v), format_double(result.topology.locations[v].latitude),
               format_double(result.topology.locations[v].longitude), peers});
    }
    return w.finish();
}

// Delay and interval summaries over the usable records: delay rows from
// complete configuration blocks committed before the horizon margin,
// interval rows split by switch classification.
struct RunSummaries {
    std::optional<QuantileSummary> agreement, propagation, update, total;
    std::optional<QuantileSummary> normal_intervals, switch_intervals;
    std::size_t summarized_cbs = 0;
};

inline RunSummaries compute_summaries(const RunResult& result) {
    RunSummaries s;
    const double cutoff = result.scenario.duration_s - result.summary_horizon_margin_s;
    std::vector<DelayRecord> usable;
    for (const DelayRecord& rec : result.delays) {
        if (rec.commit_time <= cutoff) {
            usable.push_back(rec);
        }
    }
    s.summarized_cbs = usable.size();
    const DelaySamples samples = pool_delay_samples(usable);
    if (!samples.agreement.empty()) {
        s.agreement = summarize(samples.agreement);
        s.propagation = summarize(samples.propagation);
        s.update = summarize(samples.update);
        s.total = summarize(samples.total);
    }
    std::vector<double> normal, sw;
    for (const IntervalRecord& rec : result.intervals) {
        (rec.is_switch ? sw : normal).push_back(rec.interval_s);
    }
    if (!normal.empty()) {
        s.normal_intervals = summarize(normal);
    }
    if (!sw.empty()) {
        s.switch_intervals = summarize(sw);
    }
    return s;
}

namespace detail {

inline void put_summary(KvWriter& kv, const std::string& name,
                        const std::optional<QuantileSummary>& s) {
    if (!s) {
        kv.put(name + ".count", std::uint64_t{0});
        return;
    }
    kv.put(name + ".count", static_cast<std::uint64_t>(s->count));
    kv.put(name + ".min", s->min);
    kv.put(name + ".q1", s->q1);
    kv.put(name + ".median", s->median);
    kv.put(name + ".q3", s->q3);
    kv.put(name + ".max", s->max);
    kv.put(name + ".mean", s->mean);
}

} // namespace detail

inline std::string export_summary(const RunResult& result) {
    const RunSummaries s = compute_summaries(result);
    KvWriter kv;
    kv.put("seed", result.scenario.seed);
    kv.put("scenario_digest", to_hex(result.scenario.digest()));
    kv.put("fastest_rank_by", to_string(result.rank_by));
    kv.put("summary_horizon_margin_s", result.summary_horizon_margin_s);
    kv.put("summarized_cbs", static_cast<std::uint64_t>(s.summarized_cbs));
    detail::put_summary(kv, "agreement", s.agreement);
    detail::put_summary(kv, "propagation", s.propagation);
    detail::put_summary(kv, "update", s.update);
    detail::put_summary(kv, "total", s.total);
    detail::put_summary(kv, "interval.normal", s.normal_intervals);
    detail::put_summary(kv, "interval.switch", s.switch_intervals);
    return kv.text();
}

inline std::string export_manifest(const RunResult& result) {
    KvWriter kv;
    kv.put("version", kVersion);
    kv.put("seed", result.scenario.seed);
    kv.put("scenario_digest", to_hex(result.scenario.digest()));
    kv.put("duration_s", result.scenario.duration_s);
    kv.put("trace_hash", detail::fnv_hex(result.trace_hash));
    kv.put("event_count", result.event_count);
    kv.put("cb_committed", static_cast<std::uint64_t>(result.chain.management.size() - 1));
    kv.put("tx_blocks_committed", static_cast<std::uint64_t>(result.chain.primary.size() - 1));
    kv.put("agreement_failures", std::uint64_t{result.agreement_failures});
    kv.put("incomplete_cbs", result.incomplete_cbs);
    kv.put("fastest_rank_by", to_string(result.rank_by));
    kv.put("activation_lag_tolerance_s", result.activation_lag_tolerance_s);
    kv.put("verification", result.verification.ok() ? "pass" : "fail");
    kv.put("verification_violations", static_cast<std::uint64_t>(result.verification.violations.size()));
    return kv.text();
}

// Writes every artifact for one run into out_dir.
inline void write_run_artifacts(const RunResult& result, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_text_file((dir / kChainsFile).string(), export_chains(result));
    write_text_file((dir / kDelaysFile).string(), export_delays(result));
    write_text_file((dir / kIntervalsFile).string(), export_intervals(result));
    write_text_file((dir / kTopologyFile).string(), export_topology(result));
    write_text_file((dir / kSummaryFile).string(), export_summary(result));
    write_text_file((dir / kManifestFile).string(), export_manifest(result));
    write_text_file((dir / kScenarioFile).string(), result.scenario.canonical());
}

// ---- export-level verification ---------------------------------------------

struct ExportedBlock {
    std::string chain;
    std::uint64_t height = 0;
    std::string hash;
    std::string prev_hash;
    std::string config_ref;
    double commit_time = 0.0;
    std::uint64_t proof_count = 0;
};

inline std::vector<ExportedBlock> parse_chain_export(const Table& table,
                                                     VerificationReport& report) {
    std::vector<ExportedBlock> blocks;
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            report.violations.push_back(Violation{"export", 0, "ragged row in chain export"});
            continue;
        }
        ExportedBlock b;
        b.chain = row[0];
        b.height = std::strtoull(row[1].c_str(), nullptr, 10);
        b.hash = row[2];
        b.prev_hash = row[3];
        b.config_ref = row[4];
        b.commit_time = std::strtod(row[7].c_str(), nullptr);
        b.proof_count = std::strtoull(row[8].c_str(), nullptr, 10);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

// Rebuilds the exported chains block by block: table digest, hash linkage,
// height contiguity, commit-time monotonicity, quorum proof counts,
// configuration references and the activation-lag staleness rule.
inline VerificationReport verify_chain_export(const std::string& chains_text,
                                              std::uint32_t mgmt_validator_count,
                                              double activation_lag_tolerance_s) {
    VerificationReport report;
    const Table table = parse_table(chains_text);
    if (!table.digest_ok) {
        report.violations.push_back(Violation{"export", 0, "content digest mismatch"});
    }
    std::vector<ExportedBlock> mgmt, primary;
    for (ExportedBlock& b : parse_chain_export(table, report)) {
        (b.chain == "management" ? mgmt : primary).push_back(std::move(b));
    }
    const std::uint32_t quorum = quorum_size(mgmt_validator_count);

    auto check_links = [&report](const std::vector<ExportedBlock>& blocks, const char* tag) {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (blocks[i].height != i) {
                report.violations.push_back(Violation{tag, blocks[i].height, "height out of sequence"});
            }
            if (i > 0) {
                if (blocks[i].prev_hash != blocks[i - 1].hash) {
                    report.violations.push_back(
                        Violation{tag, blocks[i].height, "prev_hash does not match predecessor"});
                }
                if (blocks[i].commit_time < blocks[i - 1].commit_time) {
                    report.violations.push_back(
                        Violation{tag, blocks[i].height, "commit time decreases"});
                }
            }
        }
    };
    check_links(mgmt, "management");
    check_links(primary, "primary");

    std::map<std::string, std::size_t> cb_by_hash;
    for (std::size_t i = 0; i < mgmt.size(); ++i) {
        cb_by_hash[mgmt[i].hash] = i;
        if (i > 0 && mgmt[i].proof_count < quorum) {
            report.violations.push_back(
                Violation{"management", mgmt[i].height,
                          "proof count " + std::to_string(mgmt[i].proof_count) + " below quorum " +
                              std::to_string(quorum)});
        }
    }
    for (const ExportedBlock& tb : primary) {
        auto it = cb_by_hash.find(tb.config_ref);
        if (it == cb_by_hash.end()) {
            report.violations.push_back(
                Violation{"primary", tb.height, "config_ref not on the management chain"});
            continue;
        }
        if (mgmt[it->second].commit_time > tb.commit_time) {
            report.violations.push_back(
                Violation{"primary", tb.height, "references a configuration committed in its future"});
        }
        for (std::size_t j = it->second + 1; j < mgmt.size(); ++j) {
            if (mgmt[j].commit_time + activation_lag_tolerance_s <= tb.commit_time) {
                report.violations.push_back(
                    Violation{"primary", tb.height,
                              "still references height " + std::to_string(it->second) +
                                  " long after configuration " + std::to_string(j) + " committed"});
                break;
            }
        }
    }
    return report;
}

// `verify <run_dir>`: re-checks the exported chains. Returns the report.
inline VerificationReport verify_run_dir(const std::string& run_dir) {
    const std::filesystem::path dir(run_dir);
    if (!std::filesystem::exists(dir / kChainsFile) || !std::filesystem::exists(dir / kScenarioFile) ||
        !std::filesystem::exists(dir / kManifestFile)) {
        throw SimError(ErrorCode::MissingArtifacts, "run artifacts not found in " + run_dir);
    }
    const Scenario scn = parse_scenario(read_text_file((dir / kScenarioFile).string()));
    double tolerance = 10.0;
    for (const auto& [key, value] : parse_kv(read_text_file((dir / kManifestFile).string()))) {
        if (key == "activation_lag_tolerance_s") {
            tolerance = std::strtod(value.c_str(), nullptr);
        }
    }
    return verify_chain_export(read_text_file((dir / kChainsFile).string()), scn.mgmt_nodes,
                               tolerance);
}

// `summarize <run_dir>`: recomputes quantile summaries from the exported
// delay and interval tables.
inline std::string summarize_run_dir(const std::string& run_dir) {
    const std::filesystem::path dir(run_dir);
    if (!std::filesystem::exists(dir / kDelaysFile) || !std::filesystem::exists(dir / kIntervalsFile)) {
        throw SimError(ErrorCode::MissingArtifacts, "run artifacts not found in " + run_dir);
    }
    const Table delays = parse_table(read_text_file((dir / kDelaysFile).string()));
    const Table intervals = parse_table(read_text_file((dir / kIntervalsFile).string()));
    std::vector<double> agreement, propagation, update, total;
    for (const auto& row : delays.rows) {
        const double a = std::strtod(row[3].c_str(), nullptr);
        const double p = std::strtod(row[5].c_str(), nullptr);
        const double u = std::strtod(row[6].c_str(), nullptr);
        agreement.push_back(a);
        propagation.push_back(p);
        update.push_back(u);
        total.push_back(a + p + u);
    }
    std::vector<double> normal, sw;
    for (const auto& row : intervals.rows) {
        (row[2] == "1" ? sw : normal).push_back(std::strtod(row[1].c_str(), nullptr));
    }
    KvWriter kv;
    kv.put("delays_digest_ok", delays.digest_ok ? "yes" : "no");
    kv.put("intervals_digest_ok", intervals.digest_ok ? "yes" : "no");
    auto emit = [&kv](const std::string& name, std::vector<double>& values) {
        if (values.empty()) {
            kv.put(name + ".count", std::uint64_t{0});
            return;
        }
        detail::put_summary(kv, name, summarize(values));
    };
    emit("agreement", agreement);
    emit("propagation", propagation);
    emit("update", update);
    emit("total", total);
    emit("interval.normal", normal);
    emit("interval.switch", sw);
    return kv.text();
}

} // namespace chainsim
