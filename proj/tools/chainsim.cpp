// chainsim command-line front end: run one scenario, sweep a parameter,
// verify exported chains, or summarize a run directory.
//
// Exit codes: 0 success, 1 verification failure, 2 usage or parse error.

#include "chainsim/artifacts.hpp"
#include "chainsim/runner.hpp"
#include "chainsim/scenario.hpp"
#include "chainsim/sweep.hpp"
#include "chainsim/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

int cmd_run(const std::string& scenario_path, std::int64_t seed, const std::string& out_dir,
            const std::string& rank_by) {
    chainsim::Scenario scn =
        scenario_path.empty() ? chainsim::Scenario{} : chainsim::load_scenario(scenario_path);
    if (seed >= 0) {
        scn.seed = static_cast<std::uint64_t>(seed);
    }
    scn.validate();

    chainsim::RunParams params;
    params.scenario = scn;
    params.rank_by = rank_by == "arrival" ? chainsim::FastestRankBy::Arrival
                                          : chainsim::FastestRankBy::Activation;
    const chainsim::RunResult result = chainsim::run_scenario(std::move(params));
    chainsim::write_run_artifacts(result, out_dir);

    std::cout << "committed configuration blocks: " << result.chain.management.size() - 1 << "\n"
              << "committed transaction blocks:   " << result.chain.primary.size() - 1 << "\n"
              << "agreement failures:             " << result.agreement_failures << "\n"
              << "events processed:               " << result.event_count << "\n"
              << "verification:                   "
              << (result.verification.ok() ? "pass" : "FAIL") << "\n"
              << "artifacts:                      " << out_dir << "\n";
    if (!result.verification.ok()) {
        for (const chainsim::Violation& v : result.verification.violations) {
            std::cerr << "violation: " << v.chain << " height " << v.height << ": " << v.what
                      << "\n";
        }
        return 1;
    }
    return 0;
}

int cmd_sweep(const std::string& scenario_path, const std::string& param, const std::string& values,
              const std::string& seeds, const std::string& out_dir, unsigned jobs) {
    chainsim::SweepSpec spec;
    spec.base = scenario_path.empty() ? chainsim::Scenario{} : chainsim::load_scenario(scenario_path);
    spec.parameter = param;
    spec.values = split_csv(values);
    for (const std::string& s : split_csv(seeds)) {
        spec.seeds.push_back(std::strtoull(s.c_str(), nullptr, 10));
    }
    spec.jobs = jobs;
    const chainsim::SweepResult result = chainsim::run_sweep(std::move(spec));
    chainsim::write_sweep_artifacts(result, out_dir);

    bool all_ok = true;
    for (const chainsim::SweepCell& cell : result.cells) {
        all_ok = all_ok && cell.verification_ok;
    }
    std::cout << "sweep runs: " << result.cells.size() << "\n"
              << "verification: " << (all_ok ? "pass" : "FAIL") << "\n"
              << "artifacts: " << out_dir << "\n";
    return all_ok ? 0 : 1;
}

int cmd_verify(const std::string& run_dir) {
    const chainsim::VerificationReport report = chainsim::verify_run_dir(run_dir);
    if (report.ok()) {
        std::cout << "verification: pass\n";
        return 0;
    }
    for (const chainsim::Violation& v : report.violations) {
        std::cout << "violation: " << v.chain << " height " << v.height << ": " << v.what << "\n";
    }
    std::cout << "verification: FAIL (" << report.violations.size() << " violations)\n";
    return 1;
}

int cmd_summarize(const std::string& run_dir) {
    std::cout << chainsim::summarize_run_dir(run_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"discrete-event simulator of a management-chain-governed blockchain"};
    app.set_version_flag("--version", chainsim::kVersion);
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    std::int64_t seed = -1;
    std::string rank_by = "activation";

    CLI::App* run = app.add_subcommand("run", "run one scenario and export artifacts");
    run->add_option("--scenario", scenario_path, "scenario file (defaults to the baseline)");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--rank-by", rank_by, "fastest-quorum ranking: activation|arrival")
        ->check(CLI::IsMember({"activation", "arrival"}));

    std::string param, values, seeds = "1,2,3,4,5";
    unsigned jobs = 1;
    CLI::App* sweep = app.add_subcommand("sweep", "run a one-parameter sweep");
    sweep->add_option("--scenario", scenario_path, "base scenario file");
    sweep->add_option("--param", param, "scenario field to vary")->required();
    sweep->add_option("--values", values, "comma-separated values")->required();
    sweep->add_option("--seeds", seeds, "comma-separated seeds (default 1,2,3,4,5)");
    sweep->add_option("--out", out_dir, "output directory")->required();
    sweep->add_option("--jobs", jobs, "parallel runs");

    std::string run_dir;
    CLI::App* verify = app.add_subcommand("verify", "re-verify exported chains in a run directory");
    verify->add_option("dir", run_dir, "run directory")->required();

    CLI::App* summarize = app.add_subcommand("summarize", "recompute summaries from a run directory");
    summarize->add_option("dir", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, seed, out_dir, rank_by);
        }
        if (sweep->parsed()) {
            return cmd_sweep(scenario_path, param, values, seeds, out_dir, jobs);
        }
        if (verify->parsed()) {
            return cmd_verify(run_dir);
        }
        if (summarize->parsed()) {
            return cmd_summarize(run_dir);
        }
    } catch (const chainsim::SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
