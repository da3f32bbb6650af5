#pragma once

#include "chainsim/errors.hpp"

#include <cstdint>

namespace chainsim {

// Standard PBFT fault budget: f = floor((n-1)/3), quorum = 2f+1.
struct QuorumParams {
    std::uint32_t n = 0;
    std::uint32_t f = 0;
    std::uint32_t quorum = 0;

    static QuorumParams for_validators(std::uint32_t n) {
        if (n < 1) {
            throw SimError(ErrorCode::InvalidValue, "validator count must be >= 1");
        }
        QuorumParams q;
        q.n = n;
        q.f = (n - 1) / 3;
        q.quorum = 2 * q.f + 1;
        return q;
    }
};

inline std::uint32_t quorum_size(std::uint32_t n) { return QuorumParams::for_validators(n).quorum; }

} // namespace chainsim
