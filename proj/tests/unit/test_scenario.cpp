#include "chainsim/scenario.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace chainsim;

TEST_CASE("an empty document is the full baseline") {
    const Scenario scn = parse_scenario("");
    REQUIRE(scn.primary_nodes == 32);
    REQUIRE(scn.peers_per_node == 16);
    REQUIRE(scn.mgmt_nodes == 16);
    REQUIRE(scn.bandwidth_mean_mbps == 10.0);
    REQUIRE(scn.bandwidth_std_mbps == 0.5);
    REQUIRE(scn.base_latency_s == 0.005);
    REQUIRE(scn.signal_speed_km_s == 200000.0);
    REQUIRE(scn.tx_block_size_limit_mb == 1.0);
    REQUIRE(scn.block_interval_s == 0.1);
    REQUIRE(scn.config_block_size_mb == 0.25);
    REQUIRE(scn.cbi_mean_s == 30.0);
    REQUIRE(scn.cbi_std_s == 5.0);
    REQUIRE(scn.duration_s == 3600.0);
    REQUIRE(scn.cycle_timeout_s == 5.0);
    REQUIRE(scn.vote_size_mb == 0.001);
    REQUIRE(scn.tx_rate_per_s == 500.0);
    REQUIRE(scn.tx_size_mb == 0.002);
    REQUIRE(scn.offline_mgmt_nodes.none());
    REQUIRE(scn.twin_policy == TwinPolicyKind::Constant);
}

TEST_CASE("a single override keeps every other default") {
    const Scenario scn = parse_scenario("config_block_size_mb 0.5\n");
    REQUIRE(scn.config_block_size_mb == 0.5);
    REQUIRE(scn.cbi_mean_s == 30.0);
    REQUIRE(scn.primary_nodes == 32);
}

TEST_CASE("key separators, comments and blank lines") {
    const Scenario scn = parse_scenario(
        "# comment only\n"
        "\n"
        "cbi_mean_s: 25\n"
        "cbi_std_s = 2.5\n"
        "duration_s 600  # trailing comment\n");
    REQUIRE(scn.cbi_mean_s == 25.0);
    REQUIRE(scn.cbi_std_s == 2.5);
    REQUIRE(scn.duration_s == 600.0);
}

TEST_CASE("a misspelled key is rejected") {
    try {
        parse_scenario("bandwith_mean_mbps 10\n");
        FAIL("expected UnknownKey");
    } catch (const SimError& e) {
        REQUIRE(e.code() == ErrorCode::UnknownKey);
    }
}

TEST_CASE("invalid values are rejected") {
    SECTION("unparseable number") {
        try {
            parse_scenario("cbi_mean_s fast\n");
            FAIL("expected ParseError");
        } catch (const SimError& e) {
            REQUIRE(e.code() == ErrorCode::ParseError);
        }
    }
    SECTION("constraint violations") {
        REQUIRE_THROWS_AS(parse_scenario("mgmt_nodes 33\n"), SimError);
        REQUIRE_THROWS_AS(parse_scenario("peers_per_node 32\n"), SimError);
        REQUIRE_THROWS_AS(parse_scenario("tx_size_mb -1\n"), SimError);
        REQUIRE_THROWS_AS(parse_scenario("twin_policy sometimes\n"), SimError);
    }
}

TEST_CASE("offline management nodes accept a count or an explicit list") {
    const Scenario count = parse_scenario("offline_mgmt_nodes 5\n");
    REQUIRE(count.offline_mgmt_nodes.count == 5);
    REQUIRE_FALSE(count.offline_mgmt_nodes.explicit_ids.has_value());

    const Scenario list = parse_scenario("offline_mgmt_nodes 3,5,9\n");
    REQUIRE(list.offline_mgmt_nodes.explicit_ids ==
            std::optional<std::vector<NodeId>>{{3, 5, 9}});
}

TEST_CASE("the scenario digest changes iff a field changes") {
    const Scenario base = parse_scenario("");
    Scenario same = parse_scenario("cbi_mean_s 30\n");  // explicit default
    REQUIRE(base.digest() == same.digest());

    Scenario tweaked = base;
    tweaked.vote_size_mb = 0.002;
    REQUIRE(base.digest() != tweaked.digest());

    Scenario reseeded = base;
    reseeded.seed = base.seed + 1;
    REQUIRE(base.digest() != reseeded.digest());
}

TEST_CASE("canonical form round-trips through the parser") {
    Scenario scn = parse_scenario("");
    scn.bandwidth_mean_mbps = 1.0;
    scn.twin_policy = TwinPolicyKind::Changing;
    scn.offline_mgmt_nodes.count = 2;
    scn.seed = 99;
    const Scenario back = parse_scenario(scn.canonical());
    REQUIRE(back.digest() == scn.digest());
}
