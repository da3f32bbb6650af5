#include "chainsim/artifacts.hpp"
#include "chainsim/runner.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace chainsim;

namespace {

Scenario small_scenario() {
    return parse_scenario(
        "primary_nodes 8\n"
        "peers_per_node 4\n"
        "mgmt_nodes 4\n"
        "duration_s 120\n"
        "cbi_mean_s 10\n"
        "cbi_std_s 1\n"
        "tx_rate_per_s 50\n"
        "seed 7\n");
}

} // namespace

TEST_CASE("a small end-to-end run commits blocks on both chains and verifies") {
    RunParams params;
    params.scenario = small_scenario();
    const RunResult result = run_scenario(params);

    REQUIRE(result.chain.management.size() > 2);   // several configuration blocks
    REQUIRE(result.chain.primary.size() > 10);     // steady block production
    REQUIRE(result.agreement_failures == 0);
    CAPTURE(result.verification.violations.size());
    for (const Violation& v : result.verification.violations) {
        CAPTURE(v.chain, v.height, v.what);
    }
    REQUIRE(result.verification.ok());

    SECTION("delay records exist and decompose nonnegatively") {
        REQUIRE_FALSE(result.delays.empty());
        for (const DelayRecord& rec : result.delays) {
            REQUIRE(rec.agreement() >= 0.0);
            REQUIRE(rec.per_node.size() == quorum_size(8));
            for (const NodeDelay& nd : rec.per_node) {
                REQUIRE(nd.propagation(rec.commit_time) >= 0.0);
                REQUIRE(nd.update() >= 0.0);
            }
        }
    }

    SECTION("intervals cover every non-genesis block") {
        REQUIRE(result.intervals.size() == result.chain.primary.size() - 1);
    }

    SECTION("per-height committed digests are unique (safety)") {
        for (const auto& [key, digests] : result.committed_digests) {
            REQUIRE(digests.size() == 1);
        }
    }

    SECTION("activations never fall inside a round window") {
        std::size_t checked = 0;
        for (const ActivationAudit& act : result.activations) {
            for (const RoundWindowAudit& win : result.round_windows) {
                if (win.node != act.node) {
                    continue;
                }
                const bool inside = act.step > win.start_step && act.step < win.end_step;
                REQUIRE_FALSE(inside);
                ++checked;
            }
        }
        REQUIRE(checked > 0);
    }

    SECTION("cbi minimum-interval holds between consecutive commits") {
        double last_commit = 0.0;
        for (const AgreementAudit& audit : result.agreements) {
            if (!audit.committed) {
                continue;
            }
            const double commit =
                result.chain.management[audit.cb_height].commit_time;
            REQUIRE(commit - last_commit >= audit.cbi_sample - 1e-9);
            last_commit = commit;
        }
    }
}

TEST_CASE("same scenario and seed reproduce the identical run") {
    RunParams params;
    params.scenario = small_scenario();
    const RunResult a = run_scenario(params);
    const RunResult b = run_scenario(params);
    REQUIRE(a.trace_hash == b.trace_hash);
    REQUIRE(a.event_count == b.event_count);
    REQUIRE(export_delays(a) == export_delays(b));
    REQUIRE(export_intervals(a) == export_intervals(b));
    REQUIRE(export_chains(a) == export_chains(b));

    RunParams other = params;
    other.scenario.seed = 8;
    const RunResult c = run_scenario(other);
    REQUIRE(a.trace_hash != c.trace_hash);
}

TEST_CASE("zero duration leaves genesis-only chains that still verify") {
    RunParams params;
    params.scenario = small_scenario();
    params.scenario.duration_s = 0.0;
    const RunResult result = run_scenario(params);
    REQUIRE(result.chain.management.size() == 1);
    REQUIRE(result.chain.primary.size() == 1);
    REQUIRE(result.intervals.empty());
    REQUIRE(result.delays.empty());
    REQUIRE(result.verification.ok());
}

TEST_CASE("run artifacts round-trip through the export verifier") {
    const auto dir = std::filesystem::temp_directory_path() / "chainsim_test_run";
    std::filesystem::remove_all(dir);

    RunParams params;
    params.scenario = small_scenario();
    const RunResult result = run_scenario(params);
    write_run_artifacts(result, dir.string());

    SECTION("untouched artifacts verify clean") {
        const VerificationReport report = verify_run_dir(dir.string());
        for (const Violation& v : report.violations) {
            CAPTURE(v.chain, v.height, v.what);
        }
        REQUIRE(report.ok());
    }

    SECTION("flipping one hash hex digit is detected") {
        const auto chains_path = (dir / kChainsFile).string();
        std::string text = read_text_file(chains_path);
        // Flip the first hex digit of the first block hash (third column).
        const std::size_t header_end = text.find('\n');
        std::size_t tab = text.find('\t', header_end);
        tab = text.find('\t', tab + 1);
        const std::size_t pos = tab + 1;
        text[pos] = text[pos] == 'a' ? 'b' : 'a';
        write_text_file(chains_path, text);
        const VerificationReport report = verify_run_dir(dir.string());
        REQUIRE_FALSE(report.ok());
    }

    SECTION("missing artifacts are reported as such") {
        std::filesystem::remove(dir / kChainsFile);
        try {
            verify_run_dir(dir.string());
            FAIL("expected MissingArtifacts");
        } catch (const SimError& e) {
            REQUIRE(e.code() == ErrorCode::MissingArtifacts);
        }
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("summarize recomputes quantiles from exported tables") {
    const auto dir = std::filesystem::temp_directory_path() / "chainsim_test_sum";
    std::filesystem::remove_all(dir);
    RunParams params;
    params.scenario = small_scenario();
    const RunResult result = run_scenario(params);
    write_run_artifacts(result, dir.string());

    const std::string text = summarize_run_dir(dir.string());
    REQUIRE(text.find("delays_digest_ok yes") != std::string::npos);
    REQUIRE(text.find("agreement.median") != std::string::npos);
    REQUIRE(text.find("interval.normal.count") != std::string::npos);
    std::filesystem::remove_all(dir);
}
