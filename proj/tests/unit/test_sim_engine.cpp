#include "chainsim/sim_engine.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace chainsim;

TEST_CASE("events dequeue in time order with seq tie-break") {
    SimEngine engine;
    std::vector<EventId> fired;
    engine.set_handler([&fired](const SimEvent& ev) { fired.push_back(ev.seq); });

    const EventId first = engine.schedule(0.0, kSystemNode, EventKind::CbiTrigger);
    REQUIRE(first == 1);
    const EventId a = engine.schedule(5.0, kSystemNode, EventKind::CbiTrigger);
    const EventId b = engine.schedule(5.0, kSystemNode, EventKind::CbiTrigger);
    const EventId early = engine.schedule(2.0, kSystemNode, EventKind::CbiTrigger);

    engine.run_until(10.0);
    REQUIRE(fired == std::vector<EventId>{first, early, a, b});
    REQUIRE(engine.clock() == 10.0);
}

TEST_CASE("scheduling into the past is an error") {
    SimEngine engine;
    engine.schedule(1.0, kSystemNode, EventKind::CbiTrigger);
    engine.run_until(3.0);
    REQUIRE_THROWS_AS(engine.schedule(2.0, kSystemNode, EventKind::CbiTrigger), SimError);
    try {
        engine.schedule(2.0, kSystemNode, EventKind::CbiTrigger);
    } catch (const SimError& e) {
        REQUIRE(e.code() == ErrorCode::SchedulingInPast);
    }
}

TEST_CASE("cancel prevents delivery and reports liveness") {
    SimEngine engine;
    std::vector<EventId> fired;
    engine.set_handler([&fired](const SimEvent& ev) { fired.push_back(ev.seq); });

    const EventId pending = engine.schedule(5.0, kSystemNode, EventKind::CycleTimeout);
    const EventId fired_id = engine.schedule(1.0, kSystemNode, EventKind::CycleTimeout);
    engine.run_until(2.0);

    REQUIRE(engine.cancel(pending));
    REQUIRE_FALSE(engine.cancel(pending));    // already cancelled
    REQUIRE_FALSE(engine.cancel(fired_id));   // already fired
    REQUIRE_FALSE(engine.cancel(999'999));    // never issued

    engine.run_until(10.0);
    REQUIRE(fired == std::vector<EventId>{fired_id});
}

TEST_CASE("run_until with an empty queue just advances the clock") {
    SimEngine engine;
    REQUIRE(engine.run_until(3600.0) == 0);
    REQUIRE(engine.clock() == 3600.0);
    REQUIRE(engine.run_until(3600.0) == 0);  // no-op at the clock
}

TEST_CASE("identical schedules give identical trace hashes") {
    auto drive = [](std::uint64_t seed) {
        SimEngine engine;
        RandomStream stream(seed, "workload");
        engine.set_handler([&](const SimEvent& ev) {
            if (ev.time < 50.0) {
                engine.schedule(ev.time + stream.next_exponential(2.0), ev.target,
                                EventKind::TxArrival);
            }
        });
        engine.schedule(0.0, 3, EventKind::TxArrival);
        engine.run_until(100.0);
        return engine.trace_hash();
    };
    REQUIRE(drive(7) == drive(7));
    REQUIRE(drive(7) != drive(8));
}

TEST_CASE("random streams are label-independent and reproducible") {
    RandomStream a1(42, "topology"), a2(42, "topology");
    RandomStream b(42, "workload");
    bool all_equal = true;
    bool any_differ = false;
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t x = a1.next_u64();
        all_equal = all_equal && (x == a2.next_u64());
        any_differ = any_differ || (x != b.next_u64());
    }
    REQUIRE(all_equal);
    REQUIRE(any_differ);
}

TEST_CASE("sample_normal: zero variance, floor clamp, bad sigma") {
    RandomStream s(1, "cbi");
    REQUIRE(sample_normal(s, 30.0, 0.0, 0.1) == 30.0);

    RandomStream f(2, "cbi");
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(sample_normal(f, 1.0, 10.0, 0.01) >= 0.01);
    }

    RandomStream bad(3, "cbi");
    REQUIRE_THROWS_AS(sample_normal(bad, 1.0, -0.5, 0.0), SimError);
}

TEST_CASE("sample_normal mean converges (mu=10, sigma=0.5)") {
    RandomStream s(2024, "bandwidth");
    double sum = 0.0;
    constexpr int kSamples = 10'000;
    for (int i = 0; i < kSamples; ++i) {
        sum += sample_normal(s, 10.0, 0.5, 0.1);
    }
    const double mean = sum / kSamples;
    REQUIRE(mean > 10.0 - 0.05);
    REQUIRE(mean < 10.0 + 0.05);
}

TEST_CASE("clock never decreases while draining a random schedule") {
    SimEngine engine;
    RandomStream s(5, "topology");
    double last = -1.0;
    bool monotone = true;
    engine.set_handler([&](const SimEvent& ev) {
        monotone = monotone && ev.time >= last;
        last = ev.time;
    });
    for (int i = 0; i < 500; ++i) {
        engine.schedule(s.next_range(0.0, 100.0), kSystemNode, EventKind::MessageDelivery);
    }
    engine.run_until(100.0);
    REQUIRE(monotone);
}
