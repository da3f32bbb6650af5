#include "chainsim/mgmt_chain.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <vector>

using namespace chainsim;

namespace {

Configuration fixed_config() {
    Configuration c;
    c.values["block_size_limit"] = 1.0;
    c.values["block_interval"] = 0.1;
    c.values["validator_set"] = std::vector<NodeId>{0, 1, 2, 3};
    return c;
}

struct AgreementHarness {
    SimEngine engine;
    RandomStream bw{3, "bandwidth"};
    Topology topo;
    ChainPair chain = make_genesis(fixed_config());
    std::vector<ManagementNode> nodes;
    std::unique_ptr<AgreementDriver> driver;
    std::optional<AgreementResult> committed;
    std::optional<AgreementResult> failed;
    ConfigurationBlock committed_cb;

    explicit AgreementHarness(std::uint32_t n, std::vector<NodeId> offline = {},
                              TwinPolicy twin = constant_twin(fixed_config())) {
        RandomStream geo(7, "geography"), ts(7, "topology");
        topo = build_topology(n, 4, geo, ts);
        topo.bandwidth_std_mbps = 0.0;
        for (NodeId i = 0; i < n; ++i) {
            ManagementNode node;
            node.id = i;
            node.twin = twin;
            node.online = std::find(offline.begin(), offline.end(), i) == offline.end();
            nodes.push_back(std::move(node));
        }
        AgreementDriver::Params params;  // cycle timeout 5 s
        AgreementDriver::Hooks hooks;
        hooks.on_commit = [this](const ConfigurationBlock& cb, const AgreementResult& result) {
            committed = result;
            committed_cb = cb;
        };
        hooks.on_failed = [this](const AgreementResult& result) { failed = result; };
        driver = std::make_unique<AgreementDriver>(engine, topo, bw, chain, nodes, params, hooks);
        engine.set_handler([this](const SimEvent& ev) { driver->on_event(ev); });
    }

    void trigger_and_run(double trigger_time, double horizon) {
        engine.run_until(trigger_time);
        driver->start(trigger_time);
        engine.run_until(horizon);
    }
};

} // namespace

TEST_CASE("schedule_cbi adds the sampled interval to the last commit") {
    SimEngine engine;
    CbiSchedule sched;
    sched.mean_s = 30.0;
    sched.std_s = 0.0;
    RandomStream stream(1, "cbi");
    REQUIRE(schedule_cbi(engine, 100.0, sched, stream) == 130.0);
    REQUIRE(sched.next_trigger == 130.0);
    REQUIRE_FALSE(engine.empty());
}

TEST_CASE("cbi samples are floored at one second") {
    SimEngine engine;
    CbiSchedule sched;
    sched.mean_s = 1.0;
    sched.std_s = 50.0;
    RandomStream stream(2, "cbi");
    for (int i = 0; i < 200; ++i) {
        schedule_cbi(engine, 0.0, sched, stream);
        REQUIRE(sched.last_sample >= 1.0);
    }
}

TEST_CASE("cbi sample mean converges to 30 s") {
    SimEngine engine;
    CbiSchedule sched;  // defaults 30 / 5
    RandomStream stream(3, "cbi");
    double sum = 0.0;
    for (int i = 0; i < 1000; ++i) {
        schedule_cbi(engine, 0.0, sched, stream);
        sum += sched.last_sample;
    }
    const double mean = sum / 1000.0;
    REQUIRE(mean > 29.5);
    REQUIRE(mean < 30.5);
}

TEST_CASE("validate_proposal gates on structure, cycle and twin") {
    ChainPair chain = make_genesis(fixed_config());
    ManagementNode node;
    node.id = 1;
    node.twin = constant_twin(fixed_config());
    node.online = true;

    ConfigurationBlock good =
        make_config_block(chain.management.back().hash, 0, fixed_config(), 1);
    REQUIRE(validate_proposal(node, good, 0, 0, chain.management.back()));

    SECTION("stale prev_hash") {
        ConfigurationBlock stale = make_config_block(Digest{}, 0, fixed_config(), 1);
        REQUIRE_FALSE(validate_proposal(node, stale, 0, 0, chain.management.back()));
    }
    SECTION("cycle mismatch") {
        REQUIRE_FALSE(validate_proposal(node, good, 0, 1, chain.management.back()));
    }
    SECTION("twin rejects a different configuration") {
        Configuration other = fixed_config();
        other.values["block_size_limit"] = 2.0;
        ConfigurationBlock cb = make_config_block(chain.management.back().hash, 0, other, 1);
        REQUIRE_FALSE(validate_proposal(node, cb, 0, 0, chain.management.back()));
    }
    SECTION("offline node never votes") {
        node.online = false;
        REQUIRE_FALSE(validate_proposal(node, good, 0, 0, chain.management.back()));
    }
}

TEST_CASE("agreement with 16 online nodes commits in cycle 0 by the rotation proposer") {
    AgreementHarness h(16);
    const Digest tip_hash = h.chain.management.back().hash;
    h.trigger_and_run(10.0, 100.0);

    REQUIRE(h.committed.has_value());
    REQUIRE(h.committed->cycles_used == 0);
    REQUIRE(h.chain.management.size() == 2);
    REQUIRE(h.committed_cb.proposer == select_proposer(tip_hash, 0, 16));
    REQUIRE(h.committed_cb.proof.size() == 11);
    REQUIRE(h.committed->end_time > 10.0);
    REQUIRE(h.committed->end_time < 15.0);  // well inside cycle 0's window
}

TEST_CASE("offline cycle-0 proposer rotates to the next cycle") {
    ChainPair probe = make_genesis(fixed_config());
    const NodeId first = select_proposer(probe.management.back().hash, 0, 16);
    const NodeId second = select_proposer(probe.management.back().hash, 1, 16);

    AgreementHarness h(16, {first});
    h.trigger_and_run(10.0, 100.0);

    REQUIRE(h.committed.has_value());
    REQUIRE(h.committed->cycles_used == 1);  // FC went 0 -> 1 on the cycle timeout
    REQUIRE(h.committed_cb.proposer == second);
    // Cycle 1 starts one full timeout after the trigger.
    REQUIRE(h.committed->end_time > 15.0);
    REQUIRE(h.committed->end_time < 20.0);
}

TEST_CASE("agreement fails after |MN| cycles when quorum is impossible") {
    std::vector<NodeId> offline{0, 1, 2, 3, 4, 5};  // 10 online < quorum 11
    AgreementHarness h(16, offline);
    h.trigger_and_run(10.0, 200.0);

    REQUIRE_FALSE(h.committed.has_value());
    REQUIRE(h.failed.has_value());
    REQUIRE(h.failed->cycles_used == 16);
    REQUIRE(h.failed->end_time - h.failed->trigger_time >= 16 * 5.0);  // full cycle budget
    REQUIRE(h.chain.management.size() == 1);  // nothing appended
}

TEST_CASE("changing twin proposes distinct configurations per height") {
    const TwinPolicy twin = changing_twin(fixed_config());
    TwinSnapshot snap;
    snap.proposal_height = 1;
    const Configuration c1 = twin.propose(snap);
    snap.proposal_height = 2;
    const Configuration c2 = twin.propose(snap);
    REQUIRE_FALSE(c1 == c2);
    REQUIRE(twin.validate(c1));
    REQUIRE(twin.validate(c2));
    REQUIRE(c1.block_size_limit_mb() == fixed_config().block_size_limit_mb());
}
