#include "chainsim/primary_node.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <memory>
#include <vector>

using namespace chainsim;

namespace {

Configuration config_1mb() {
    Configuration c;
    c.values["block_size_limit"] = 1.0;
    c.values["block_interval"] = 0.1;
    c.values["validator_set"] = std::vector<NodeId>{0, 1, 2, 3};
    return c;
}

struct ObserverFixture {
    std::vector<NodeId> validators;
    std::vector<CbRef> chain;  // heights 0..k

    explicit ObserverFixture(std::size_t extra_blocks) {
        for (NodeId i = 0; i < 16; ++i) {
            validators.push_back(i);
        }
        ChainPair genesis = make_genesis(config_1mb());
        chain.push_back(std::make_shared<const ConfigurationBlock>(genesis.management.front()));
        for (std::size_t h = 1; h <= extra_blocks; ++h) {
            ConfigurationBlock cb = make_config_block(chain.back()->hash, validators[h % 16],
                                                      config_1mb(), h);
            for (std::size_t i = 0; i < 11; ++i) {
                cb.proof.push_back(Attestation{validators[i], cb.hash});
            }
            cb.commit_time = 30.0 * static_cast<double>(h);
            chain.push_back(std::make_shared<const ConfigurationBlock>(std::move(cb)));
        }
    }

    PrimaryNodeState node_at_tip(std::uint64_t tip) const {
        PrimaryNodeState node = PrimaryNodeState::with_genesis(7, chain[0]);
        for (std::uint64_t h = 1; h <= tip; ++h) {
            node.local_mgmt_chain.push_back(chain[h]);
            node.arrival_times.push_back(chain[h]->commit_time);
        }
        node.active_config_height = tip;
        return node;
    }
};

} // namespace

TEST_CASE("observer receipt: append, forward, gap request, invalid proof") {
    ObserverFixture fx(7);

    SECTION("next-height block appends and forwards") {
        PrimaryNodeState node = fx.node_at_tip(4);
        const auto actions = on_receive_config_block(node, fx.chain[5], 150.0, fx.validators);
        REQUIRE(actions.disposition == CbDisposition::Appended);
        REQUIRE(actions.forward);
        REQUIRE(actions.appended_heights == std::vector<std::uint64_t>{5});
        REQUIRE_FALSE(actions.request.has_value());
        REQUIRE(node.mgmt_tip() == 5);
        REQUIRE(node.arrival_times[5] == 150.0);
    }

    SECTION("future block is buffered and the gap requested from the sender") {
        PrimaryNodeState node = fx.node_at_tip(4);
        const auto actions = on_receive_config_block(node, fx.chain[7], 200.0, fx.validators);
        REQUIRE(actions.disposition == CbDisposition::Buffered);
        REQUIRE(actions.forward);
        REQUIRE(actions.request == std::make_pair<std::uint64_t, std::uint64_t>(5, 6));
        REQUIRE(node.mgmt_tip() == 4);
        REQUIRE(node.pending_blocks.count(7) == 1);
    }

    SECTION("sub-quorum proof is dropped as invalid") {
        PrimaryNodeState node = fx.node_at_tip(4);
        ConfigurationBlock weak = make_config_block(fx.chain[4]->hash, 0, config_1mb(), 5);
        for (std::size_t i = 0; i < 10; ++i) {
            weak.proof.push_back(Attestation{fx.validators[i], weak.hash});
        }
        const auto actions = on_receive_config_block(
            node, std::make_shared<const ConfigurationBlock>(std::move(weak)), 150.0, fx.validators);
        REQUIRE(actions.disposition == CbDisposition::Invalid);
        REQUIRE_FALSE(actions.forward);
        REQUIRE(node.mgmt_tip() == 4);
    }

    SECTION("duplicate receipt is dropped") {
        PrimaryNodeState node = fx.node_at_tip(5);
        const auto actions = on_receive_config_block(node, fx.chain[5], 151.0, fx.validators);
        REQUIRE(actions.disposition == CbDisposition::Duplicate);
        REQUIRE_FALSE(actions.forward);
    }

    SECTION("gap fill drains buffered blocks in order") {
        PrimaryNodeState node = fx.node_at_tip(4);
        on_receive_config_block(node, fx.chain[7], 200.0, fx.validators);
        std::vector<CbRef> response{fx.chain[5], fx.chain[6]};
        const auto appended = on_block_response(node, response, 205.0);
        REQUIRE(appended == std::vector<std::uint64_t>{5, 6, 7});
        REQUIRE(node.mgmt_tip() == 7);
        REQUIRE(node.arrival_times[7] == 200.0);  // first receipt, not drain time
        REQUIRE(node.pending_blocks.empty());
    }
}

TEST_CASE("serve_block_request honours the local tip") {
    ObserverFixture fx(8);
    const PrimaryNodeState node = fx.node_at_tip(8);

    SECTION("a served range returns the blocks") {
        const auto blocks = serve_block_request(node, 5, 6);
        REQUIRE(blocks.size() == 2);
        REQUIRE(blocks[0]->height == 5);
        REQUIRE(blocks[1]->height == 6);
    }

    SECTION("beyond the tip is UnknownRange") {
        try {
            serve_block_request(node, 9, 9);
            FAIL("expected UnknownRange");
        } catch (const SimError& e) {
            REQUIRE(e.code() == ErrorCode::UnknownRange);
        }
    }

    SECTION("empty range yields no blocks") {
        REQUIRE(serve_block_request(node, 6, 5).empty());
    }
}

TEST_CASE("between-rounds activation jumps to the latest block") {
    ObserverFixture fx(6);

    SECTION("single pending block activates at the given instant") {
        PrimaryNodeState node = fx.node_at_tip(4);
        node.active_config_height = 4;
        on_receive_config_block(node, fx.chain[5], 150.0, fx.validators);
        const auto records = apply_pending_configs(node, 151.5);
        REQUIRE(records.size() == 1);
        REQUIRE(records[0].cb_height == 5);
        REQUIRE(records[0].time == 151.5);
        REQUIRE(node.active_config_height == 5);
    }

    SECTION("two appended blocks activate together at the same instant") {
        PrimaryNodeState node = fx.node_at_tip(4);
        on_receive_config_block(node, fx.chain[5], 150.0, fx.validators);
        on_receive_config_block(node, fx.chain[6], 152.0, fx.validators);
        const auto records = apply_pending_configs(node, 153.0);
        REQUIRE(records.size() == 2);
        REQUIRE(records[0].time == records[1].time);
        REQUIRE(node.active_config_height == 6);
    }

    SECTION("no pending blocks, no records") {
        PrimaryNodeState node = fx.node_at_tip(4);
        REQUIRE(apply_pending_configs(node, 100.0).empty());
    }

    SECTION("a node inside a round never activates") {
        PrimaryNodeState node = fx.node_at_tip(4);
        on_receive_config_block(node, fx.chain[5], 150.0, fx.validators);
        node.in_round = true;
        REQUIRE(apply_pending_configs(node, 151.0).empty());
        REQUIRE(node.active_config_height == 4);
    }
}

TEST_CASE("transaction-block validation follows the active configuration") {
    ObserverFixture fx(5);
    PrimaryNodeState node = fx.node_at_tip(5);

    const Digest primary_prev = Sha256::hash(std::string_view{"prev"});
    TransactionBlock good = make_tx_block(primary_prev, fx.chain[5]->hash, 2, 9,
                                          {{1, 0.002, 100.0}});
    REQUIRE(validate_tx_block(node, good));

    SECTION("a block referencing the previous configuration is stale") {
        TransactionBlock stale = make_tx_block(primary_prev, fx.chain[4]->hash, 2, 9, {});
        REQUIRE_FALSE(validate_tx_block(node, stale));
    }

    SECTION("an oversized block with the right reference fails") {
        std::vector<Transaction> heavy;
        for (std::uint64_t i = 0; i < 11; ++i) {
            heavy.push_back(Transaction{i, 0.1, 10.0});
        }
        TransactionBlock fat = make_tx_block(primary_prev, fx.chain[5]->hash, 2, 9, heavy);
        REQUIRE_FALSE(validate_tx_block(node, fat));
    }
}

TEST_CASE("block production drains the pool greedily") {
    ObserverFixture fx(0);
    PrimaryNodeState node = fx.node_at_tip(0);
    const Digest prev = Sha256::hash(std::string_view{"tip"});

    SECTION("empty pool still yields a header-only block") {
        const auto [block, consumed] = produce_block(node, prev, 1, {});
        REQUIRE(consumed == 0);
        REQUIRE(block.transactions.empty());
        REQUIRE(block.size_mb == kBlockHeaderMb);
    }

    SECTION("600 x 2 KB transactions fill up to the 1 MB cap") {
        std::vector<Transaction> pool;
        for (std::uint64_t i = 0; i < 600; ++i) {
            pool.push_back(Transaction{i, 0.002, 0.0});
        }
        const auto [block, consumed] = produce_block(node, prev, 1, pool);
        // Greedy-fill oracle: floor((1.0 - 0.001) / 0.002) = 499 transactions.
        REQUIRE(consumed == 499);
        REQUIRE(block.size_mb <= 1.0);
        REQUIRE(block.transactions.size() == 499);
    }

    SECTION("a small pool is included entirely") {
        std::vector<Transaction> pool;
        for (std::uint64_t i = 0; i < 12; ++i) {
            pool.push_back(Transaction{i, 0.002, 0.0});
        }
        const auto [block, consumed] = produce_block(node, prev, 1, pool);
        REQUIRE(consumed == 12);
        REQUIRE_THAT(block.size_mb, Catch::Matchers::WithinRel(0.025, 1e-9));
    }
}
