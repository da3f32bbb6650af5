#pragma once

// Parameter sweeps: |values| x |seeds| isolated runs of a base scenario with
// exactly one field varied, collated into one comparative summary row per
// (value, metric). Member runs are independent and may execute in parallel.

#include "chainsim/artifacts.hpp"
#include "chainsim/metrics.hpp"
#include "chainsim/runner.hpp"
#include "chainsim/scenario.hpp"
#include "chainsim/tables.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace chainsim {

struct SweepSpec {
    Scenario base;
    std::string parameter;
    std::vector<std::string> values;
    std::vector<std::uint64_t> seeds;
    unsigned jobs = 1;

    void validate() const {
        if (values.empty()) {
            throw SimError(ErrorCode::InvalidValue, "sweep needs at least one value");
        }
        if (seeds.empty()) {
            throw SimError(ErrorCode::InvalidValue, "sweep needs at least one seed");
        }
        for (const std::string& value : values) {
            Scenario probe = base;
            apply_scenario_field(probe, parameter, value);  // UnknownKey on typos
            probe.validate();
        }
    }
};

struct SweepCell {
    std::string value;
    std::uint64_t seed = 0;
    DelaySamples delays;
    std::vector<double> normal_intervals;
    std::vector<double> switch_intervals;
    std::uint64_t cb_committed = 0;
    bool verification_ok = false;
    std::uint64_t trace_hash = 0;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepCell> cells;  // sorted by (value index, seed index)
};

namespace detail {

inline SweepCell run_sweep_cell(const SweepSpec& spec, std::size_t value_idx, std::size_t seed_idx) {
    Scenario scn = spec.base;
    apply_scenario_field(scn, spec.parameter, spec.values[value_idx]);
    scn.seed = spec.seeds[seed_idx];
    scn.validate();

    RunParams params;
    params.scenario = scn;
    params.collect_audits = false;
    const RunResult result = run_scenario(std::move(params));

    SweepCell cell;
    cell.value = spec.values[value_idx];
    cell.seed = scn.seed;
    const double cutoff = scn.duration_s - result.summary_horizon_margin_s;
    std::vector<DelayRecord> usable;
    for (const DelayRecord& rec : result.delays) {
        if (rec.commit_time <= cutoff) {
            usable.push_back(rec);
        }
    }
    cell.delays = pool_delay_samples(usable);
    for (const IntervalRecord& rec : result.intervals) {
        (rec.is_switch ? cell.switch_intervals : cell.normal_intervals).push_back(rec.interval_s);
    }
    cell.cb_committed = result.chain.management.size() - 1;
    cell.verification_ok = result.verification.ok();
    cell.trace_hash = result.trace_hash;
    return cell;
}

} // namespace detail

inline SweepResult run_sweep(SweepSpec spec) {
    spec.validate();
    SweepResult result;
    result.cells.resize(spec.values.size() * spec.seeds.size());

    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t v = 0; v < spec.values.size(); ++v) {
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
            work.emplace_back(v, s);
        }
    }
    const unsigned jobs = std::max(1u, spec.jobs);
    if (jobs == 1) {
        for (const auto& [v, s] : work) {
            result.cells[v * spec.seeds.size() + s] = detail::run_sweep_cell(spec, v, s);
        }
    } else {
        std::mutex next_mutex;
        std::size_t next = 0;
        auto worker = [&]() {
            while (true) {
                std::size_t mine;
                {
                    std::lock_guard<std::mutex> lock(next_mutex);
                    if (next >= work.size()) {
                        return;
                    }
                    mine = next++;
                }
                const auto [v, s] = work[mine];
                result.cells[v * spec.seeds.size() + s] = detail::run_sweep_cell(spec, v, s);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < jobs; ++i) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    result.spec = std::move(spec);
    return result;
}

// Per-value pooling across seeds.
struct SweepValueSamples {
    DelaySamples delays;
    std::vector<double> normal_intervals;
    std::vector<double> switch_intervals;
};

inline std::vector<SweepValueSamples> pool_sweep(const SweepResult& result) {
    std::vector<SweepValueSamples> pooled(result.spec.values.size());
    for (std::size_t v = 0; v < result.spec.values.size(); ++v) {
        for (std::size_t s = 0; s < result.spec.seeds.size(); ++s) {
            const SweepCell& cell = result.cells[v * result.spec.seeds.size() + s];
            auto append = [](std::vector<double>& dst, const std::vector<double>& src) {
                dst.insert(dst.end(), src.begin(), src.end());
            };
            append(pooled[v].delays.agreement, cell.delays.agreement);
            append(pooled[v].delays.propagation, cell.delays.propagation);
            append(pooled[v].delays.update, cell.delays.update);
            append(pooled[v].delays.total, cell.delays.total);
            append(pooled[v].normal_intervals, cell.normal_intervals);
            append(pooled[v].switch_intervals, cell.switch_intervals);
        }
    }
    return pooled;
}

inline std::string export_sweep_summary(const SweepResult& result) {
    TableWriter w({"value", "metric", "count", "min", "q1", "median", "q3", "max", "mean"});
    const auto pooled = pool_sweep(result);
    for (std::size_t v = 0; v < result.spec.values.size(); ++v) {
        auto emit = [&](const std::string& metric, const std::vector<double>& values) {
            if (values.empty()) {
                w.row({result.spec.values[v], metric, "0", "", "", "", "", "", ""});
                return;
            }
            const QuantileSummary s = summarize(values);
            w.row({result.spec.values[v], metric, std::to_string(s.count), format_double(s.min),
                   format_double(s.q1), format_double(s.median), format_double(s.q3),
                   format_double(s.max), format_double(s.mean)});
        };
        emit("agreement", pooled[v].delays.agreement);
        emit("propagation", pooled[v].delays.propagation);
        emit("update", pooled[v].delays.update);
        emit("total", pooled[v].delays.total);
        emit("interval.normal", pooled[v].normal_intervals);
        emit("interval.switch", pooled[v].switch_intervals);
    }
    return w.finish();
}

inline std::string export_sweep_runs(const SweepResult& result) {
    TableWriter w({"value", "seed", "cb_committed", "verification", "trace_hash"});
    for (const SweepCell& cell : result.cells) {
        w.row({cell.value, std::to_string(cell.seed), std::to_string(cell.cb_committed),
               cell.verification_ok ? "pass" : "fail", detail::fnv_hex(cell.trace_hash)});
    }
    return w.finish();
}

inline void write_sweep_artifacts(const SweepResult& result, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_text_file((dir / "sweep_summary.tsv").string(), export_sweep_summary(result));
    write_text_file((dir / "sweep_runs.tsv").string(), export_sweep_runs(result));
}

} // namespace chainsim
