#pragma once

// Deterministic discrete-event core: virtual clock, ordered event queue and
// seeded random streams shared by every other component. Single-threaded per
// run; independent runs may execute in parallel with no shared state.

#include "chainsim/errors.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

using NodeId = std::uint32_t;
inline constexpr NodeId kSystemNode = std::numeric_limits<NodeId>::max();

using EventId = std::uint64_t;

enum class EventKind : std::uint8_t {
    MessageDelivery,
    CbiTrigger,
    CycleTimeout,
    BlockProposalDue,
    ConfigActivation,
    TxArrival,
};

inline const char* to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::MessageDelivery: return "MessageDelivery";
        case EventKind::CbiTrigger: return "CbiTrigger";
        case EventKind::CycleTimeout: return "CycleTimeout";
        case EventKind::BlockProposalDue: return "BlockProposalDue";
        case EventKind::ConfigActivation: return "ConfigActivation";
        case EventKind::TxArrival: return "TxArrival";
    }
    return "?";
}

// Kind-specific payload, kept as one flat POD so events stay cheap to copy.
// Field meaning depends on `type` and is owned by the scheduling component.
struct EventPayload {
    std::uint16_t type = 0;   // protocol message tag or sub-kind
    std::uint16_t cycle = 0;  // consensus cycle, when applicable
    std::uint32_t src = 0;    // sending node, when applicable
    std::uint64_t a = 0;      // e.g. block height or gossip payload id
    std::uint64_t b = 0;      // e.g. block registry index or range end
    double x = 0.0;           // e.g. message size in MB
};

struct SimEvent {
    double time = 0.0;
    EventId seq = 0;  // unique per run; breaks ties at equal times
    NodeId target = kSystemNode;
    EventKind kind = EventKind::MessageDelivery;
    EventPayload payload{};
};

// One independently seeded generator per concern (topology, geography,
// bandwidth, CBI, workload, ...). Same (seed, label) yields the identical
// sample sequence on every run: draws come from the fully specified
// mt19937_64 stream and are mapped to doubles with explicit arithmetic.
class RandomStream {
public:
    RandomStream() : RandomStream(0, "") {}

    RandomStream(std::uint64_t seed, std::string_view label) : m_label(label) {
        // FNV-1a over the seed bytes then the label decorrelates streams that
        // share a seed.
        std::uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](std::uint8_t byte) {
            h ^= byte;
            h *= 0x00000100000001b3ull;
        };
        for (int i = 0; i < 8; ++i) {
            mix(static_cast<std::uint8_t>(seed >> (8 * i)));
        }
        for (const char c : m_label) {
            mix(static_cast<std::uint8_t>(c));
        }
        m_engine.seed(h);
    }

    const std::string& label() const noexcept { return m_label; }

    // Raw engine output. mt19937_64 is fully specified by the standard, so
    // the integer sequence is identical on every platform; the double
    // mappings below stay explicit instead of going through the
    // implementation-defined <random> distributions.
    std::uint64_t next_u64() { return m_engine(); }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound) by rejection (bound > 0).
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v = next_u64();
        while (v >= limit) {
            v = next_u64();
        }
        return v % bound;
    }

    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // Standard normal via Box-Muller; consumes exactly two draws per call.
    double next_standard_normal() {
        const double u1 = 1.0 - next_unit();  // (0, 1]
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Exponential with the given rate (> 0).
    double next_exponential(double rate) {
        const double u = 1.0 - next_unit();
        return -std::log(u) / rate;
    }

private:
    std::string m_label;
    std::mt19937_64 m_engine;
};

// max(floor, N(mean, std)); consecutive calls advance the stream.
inline double sample_normal(RandomStream& stream, double mean, double std_dev, double floor) {
    if (std_dev < 0.0) {
        throw SimError(ErrorCode::InvalidDistribution, "negative standard deviation");
    }
    const double z = stream.next_standard_normal();
    const double value = mean + std_dev * z;
    return value < floor ? floor : value;
}

// FNV-1a accumulator over the processed-event stream. Two runs of the same
// scenario and seed must produce the same final value.
class TraceHash {
public:
    void absorb(const SimEvent& ev) {
        mix_u64(bit_cast_u64(ev.time));
        mix_u64(ev.seq);
        mix_u64(ev.target);
        mix_u64(static_cast<std::uint64_t>(ev.kind));
        mix_u64(ev.payload.type);
        mix_u64(ev.payload.cycle);
        mix_u64(ev.payload.src);
        mix_u64(ev.payload.a);
        mix_u64(ev.payload.b);
        mix_u64(bit_cast_u64(ev.payload.x));
    }

    std::uint64_t value() const noexcept { return m_hash; }

private:
    static std::uint64_t bit_cast_u64(double d) {
        std::uint64_t v;
        static_assert(sizeof(v) == sizeof(d));
        __builtin_memcpy(&v, &d, sizeof(v));
        return v;
    }

    void mix_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            m_hash ^= (v >> (8 * i)) & 0xff;
            m_hash *= 0x00000100000001b3ull;
        }
    }

    std::uint64_t m_hash = 0xcbf29ce484222325ull;
};

class SimEngine {
public:
    using Handler = std::function<void(const SimEvent&)>;

    double clock() const noexcept { return m_clock; }
    std::uint64_t processed_count() const noexcept { return m_processed; }
    std::uint64_t trace_hash() const noexcept { return m_trace.value(); }

    void set_handler(Handler handler) { m_handler = std::move(handler); }

    EventId schedule(SimEvent ev) {
        if (ev.time < m_clock) {
            throw SimError(ErrorCode::SchedulingInPast,
                           "event at t=" + std::to_string(ev.time) + " before clock " +
                               std::to_string(m_clock));
        }
        ev.seq = m_next_seq++;
        m_status.push_back(Status::Pending);
        m_queue.push(ev);
        return ev.seq;
    }

    EventId schedule(double time, NodeId target, EventKind kind, EventPayload payload = {}) {
        SimEvent ev;
        ev.time = time;
        ev.target = target;
        ev.kind = kind;
        ev.payload = payload;
        return schedule(ev);
    }

    // True iff the event existed and had not fired; cancelled events never fire.
    bool cancel(EventId id) {
        if (id < m_status_base || id >= m_next_seq) {
            return false;
        }
        Status& st = m_status[static_cast<std::size_t>(id - m_status_base)];
        if (st != Status::Pending) {
            return false;
        }
        st = Status::Cancelled;
        return true;
    }

    // Processes every event with time <= end_time in (time, seq) order and
    // advances the clock to exactly end_time. Returns the number processed.
    std::uint64_t run_until(double end_time) {
        if (end_time < m_clock) {
            throw SimError(ErrorCode::SchedulingInPast, "run_until into the past");
        }
        std::uint64_t processed = 0;
        while (!m_queue.empty()) {
            const SimEvent& top = m_queue.top();
            if (top.time > end_time) {
                break;
            }
            SimEvent ev = top;
            m_queue.pop();
            Status& st = m_status[static_cast<std::size_t>(ev.seq - m_status_base)];
            if (st == Status::Cancelled) {
                trim_status();
                continue;
            }
            st = Status::Fired;
            trim_status();
            m_clock = ev.time;
            m_trace.absorb(ev);
            ++m_processed;
            ++processed;
            if (m_handler) {
                m_handler(ev);
            }
        }
        m_clock = end_time;
        return processed;
    }

    bool empty() const noexcept { return m_queue.empty(); }

private:
    enum class Status : std::uint8_t { Pending, Fired, Cancelled };

    struct Later {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.time != b.time) {
                return a.time > b.time;
            }
            return a.seq > b.seq;
        }
    };

    // The status window is keyed by seq offset; resolved entries at the front
    // are dropped so memory tracks the span of outstanding events only.
    void trim_status() {
        while (!m_status.empty() && m_status.front() != Status::Pending) {
            m_status.pop_front();
            ++m_status_base;
        }
    }

    double m_clock = 0.0;
    EventId m_next_seq = 1;
    std::uint64_t m_processed = 0;
    std::priority_queue<SimEvent, std::vector<SimEvent>, Later> m_queue;
    std::deque<Status> m_status{Status::Fired};  // seq 0 never issued
    EventId m_status_base = 0;
    Handler m_handler;
    TraceHash m_trace;
};

} // namespace chainsim
