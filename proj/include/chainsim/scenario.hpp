#pragma once

// Scenario ingestion: the baseline parameter set, a flat key-value file
// format with typo-safe parsing, validation, and a canonical digest that
// changes iff any field changes.

#include "chainsim/errors.hpp"
#include "chainsim/sha256.hpp"
#include "chainsim/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

enum class TwinPolicyKind : std::uint8_t { Constant, Changing };

inline const char* to_string(TwinPolicyKind kind) noexcept {
    return kind == TwinPolicyKind::Constant ? "constant" : "changing";
}

// Which management nodes are offline: a count (first k of the drawn set) or
// an explicit id list.
struct OfflineSpec {
    std::uint32_t count = 0;
    std::optional<std::vector<NodeId>> explicit_ids;

    bool none() const { return count == 0 && !explicit_ids; }
};

struct Scenario {
    std::uint32_t primary_nodes = 32;
    std::uint32_t peers_per_node = 16;
    std::uint32_t mgmt_nodes = 16;
    double bandwidth_mean_mbps = 10.0;
    double bandwidth_std_mbps = 0.5;
    double base_latency_s = 0.005;
    double signal_speed_km_s = 200000.0;
    double tx_block_size_limit_mb = 1.0;
    double block_interval_s = 0.1;
    double config_block_size_mb = 0.25;
    double cbi_mean_s = 30.0;
    double cbi_std_s = 5.0;
    double duration_s = 3600.0;
    double cycle_timeout_s = 5.0;
    double vote_size_mb = 0.001;
    double tx_rate_per_s = 500.0;
    double tx_size_mb = 0.002;
    OfflineSpec offline_mgmt_nodes;
    TwinPolicyKind twin_policy = TwinPolicyKind::Constant;
    std::uint64_t seed = 1;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) {
                throw SimError(ErrorCode::InvalidValue, std::string(name) + " must be positive");
            }
        };
        if (primary_nodes < 2 || primary_nodes > 64) {
            throw SimError(ErrorCode::InvalidValue, "primary_nodes must be in [2, 64]");
        }
        if (peers_per_node < 1 || peers_per_node >= primary_nodes) {
            throw SimError(ErrorCode::InvalidValue, "need primary_nodes > peers_per_node >= 1");
        }
        if (mgmt_nodes < 1 || mgmt_nodes > primary_nodes) {
            throw SimError(ErrorCode::InvalidValue, "need 1 <= mgmt_nodes <= primary_nodes");
        }
        positive(bandwidth_mean_mbps, "bandwidth_mean_mbps");
        if (bandwidth_std_mbps < 0.0) {
            throw SimError(ErrorCode::InvalidValue, "bandwidth_std_mbps must be >= 0");
        }
        positive(base_latency_s, "base_latency_s");
        positive(signal_speed_km_s, "signal_speed_km_s");
        positive(tx_block_size_limit_mb, "tx_block_size_limit_mb");
        positive(block_interval_s, "block_interval_s");
        positive(config_block_size_mb, "config_block_size_mb");
        positive(cbi_mean_s, "cbi_mean_s");
        if (cbi_std_s < 0.0) {
            throw SimError(ErrorCode::InvalidValue, "cbi_std_s must be >= 0");
        }
        if (duration_s < 0.0) {
            throw SimError(ErrorCode::InvalidValue, "duration_s must be >= 0");
        }
        positive(cycle_timeout_s, "cycle_timeout_s");
        positive(vote_size_mb, "vote_size_mb");
        if (tx_rate_per_s < 0.0) {
            throw SimError(ErrorCode::InvalidValue, "tx_rate_per_s must be >= 0");
        }
        positive(tx_size_mb, "tx_size_mb");
        if (offline_mgmt_nodes.count > mgmt_nodes) {
            throw SimError(ErrorCode::InvalidValue, "offline_mgmt_nodes exceeds mgmt_nodes");
        }
    }

    // One key per line, keys in declaration order, values in canonical form.
    std::string canonical() const {
        std::ostringstream out;
        out << "primary_nodes " << primary_nodes << '\n'
            << "peers_per_node " << peers_per_node << '\n'
            << "mgmt_nodes " << mgmt_nodes << '\n'
            << "bandwidth_mean_mbps " << render(bandwidth_mean_mbps) << '\n'
            << "bandwidth_std_mbps " << render(bandwidth_std_mbps) << '\n'
            << "base_latency_s " << render(base_latency_s) << '\n'
            << "signal_speed_km_s " << render(signal_speed_km_s) << '\n'
            << "tx_block_size_limit_mb " << render(tx_block_size_limit_mb) << '\n'
            << "block_interval_s " << render(block_interval_s) << '\n'
            << "config_block_size_mb " << render(config_block_size_mb) << '\n'
            << "cbi_mean_s " << render(cbi_mean_s) << '\n'
            << "cbi_std_s " << render(cbi_std_s) << '\n'
            << "duration_s " << render(duration_s) << '\n'
            << "cycle_timeout_s " << render(cycle_timeout_s) << '\n'
            << "vote_size_mb " << render(vote_size_mb) << '\n'
            << "tx_rate_per_s " << render(tx_rate_per_s) << '\n'
            << "tx_size_mb " << render(tx_size_mb) << '\n'
            << "offline_mgmt_nodes " << render_offline() << '\n'
            << "twin_policy " << to_string(twin_policy) << '\n'
            << "seed " << seed << '\n';
        return out.str();
    }

    Digest digest() const { return Sha256::hash(canonical()); }

    static std::string render(double v) {
        char buf[32];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, end);
    }

    std::string render_offline() const {
        if (offline_mgmt_nodes.explicit_ids) {
            std::string s;
            for (std::size_t i = 0; i < offline_mgmt_nodes.explicit_ids->size(); ++i) {
                if (i) {
                    s += ',';
                }
                s += std::to_string((*offline_mgmt_nodes.explicit_ids)[i]);
            }
            return s.empty() ? "0" : s;
        }
        return std::to_string(offline_mgmt_nodes.count);
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) {
        throw SimError(ErrorCode::ParseError,
                       "bad numeric value '" + std::string(value) + "' for " + std::string(key));
    }
    return out;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view value) {
    std::uint64_t out = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) {
        throw SimError(ErrorCode::ParseError,
                       "bad integer value '" + std::string(value) + "' for " + std::string(key));
    }
    return out;
}

} // namespace detail

// Applies one key/value pair; unknown keys are an error for typo safety.
inline void apply_scenario_field(Scenario& scn, std::string_view key, std::string_view value) {
    using detail::parse_double;
    using detail::parse_u64;
    if (key == "primary_nodes") {
        scn.primary_nodes = static_cast<std::uint32_t>(parse_u64(key, value));
    } else if (key == "peers_per_node") {
        scn.peers_per_node = static_cast<std::uint32_t>(parse_u64(key, value));
    } else if (key == "mgmt_nodes") {
        scn.mgmt_nodes = static_cast<std::uint32_t>(parse_u64(key, value));
    } else if (key == "bandwidth_mean_mbps") {
        scn.bandwidth_mean_mbps = parse_double(key, value);
    } else if (key == "bandwidth_std_mbps") {
        scn.bandwidth_std_mbps = parse_double(key, value);
    } else if (key == "base_latency_s") {
        scn.base_latency_s = parse_double(key, value);
    } else if (key == "signal_speed_km_s") {
        scn.signal_speed_km_s = parse_double(key, value);
    } else if (key == "tx_block_size_limit_mb") {
        scn.tx_block_size_limit_mb = parse_double(key, value);
    } else if (key == "block_interval_s") {
        scn.block_interval_s = parse_double(key, value);
    } else if (key == "config_block_size_mb") {
        scn.config_block_size_mb = parse_double(key, value);
    } else if (key == "cbi_mean_s") {
        scn.cbi_mean_s = parse_double(key, value);
    } else if (key == "cbi_std_s") {
        scn.cbi_std_s = parse_double(key, value);
    } else if (key == "duration_s") {
        scn.duration_s = parse_double(key, value);
    } else if (key == "cycle_timeout_s") {
        scn.cycle_timeout_s = parse_double(key, value);
    } else if (key == "vote_size_mb") {
        scn.vote_size_mb = parse_double(key, value);
    } else if (key == "tx_rate_per_s") {
        scn.tx_rate_per_s = parse_double(key, value);
    } else if (key == "tx_size_mb") {
        scn.tx_size_mb = parse_double(key, value);
    } else if (key == "offline_mgmt_nodes") {
        OfflineSpec spec;
        if (value.find(',') != std::string_view::npos) {
            std::vector<NodeId> ids;
            std::size_t pos = 0;
            while (pos <= value.size()) {
                const std::size_t comma = value.find(',', pos);
                const std::string_view item =
                    detail::trim(value.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                                   : comma - pos));
                if (!item.empty()) {
                    ids.push_back(static_cast<NodeId>(parse_u64(key, item)));
                }
                if (comma == std::string_view::npos) {
                    break;
                }
                pos = comma + 1;
            }
            spec.explicit_ids = std::move(ids);
            spec.count = static_cast<std::uint32_t>(spec.explicit_ids->size());
        } else {
            spec.count = static_cast<std::uint32_t>(parse_u64(key, value));
        }
        scn.offline_mgmt_nodes = std::move(spec);
    } else if (key == "twin_policy") {
        if (value == "constant") {
            scn.twin_policy = TwinPolicyKind::Constant;
        } else if (value == "changing") {
            scn.twin_policy = TwinPolicyKind::Changing;
        } else {
            throw SimError(ErrorCode::InvalidValue,
                           "twin_policy must be constant or changing, got '" + std::string(value) + "'");
        }
    } else if (key == "seed") {
        scn.seed = parse_u64(key, value);
    } else {
        throw SimError(ErrorCode::UnknownKey, "unknown scenario key '" + std::string(key) + "'");
    }
}

// Parses a scenario document: one `key value` (or `key: value`, `key = value`)
// per line, '#' comments, blank lines allowed. Unspecified fields keep the
// baseline defaults.
inline Scenario parse_scenario(std::string_view text) {
    Scenario scn;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (!line.empty()) {
            std::size_t split = line.find_first_of(":= \t");
            if (split == std::string_view::npos) {
                throw SimError(ErrorCode::ParseError,
                               "line " + std::to_string(line_no) + ": expected 'key value'");
            }
            const std::string_view key = detail::trim(line.substr(0, split));
            std::string_view value = line.substr(split + 1);
            while (!value.empty() && (value.front() == ':' || value.front() == '=')) {
                value.remove_prefix(1);
            }
            value = detail::trim(value);
            if (value.empty()) {
                throw SimError(ErrorCode::ParseError,
                               "line " + std::to_string(line_no) + ": missing value for '" +
                                   std::string(key) + "'");
            }
            apply_scenario_field(scn, key, value);
        }
        if (eol == std::string_view::npos) {
            break;
        }
        pos = eol + 1;
    }
    scn.validate();
    return scn;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw SimError(ErrorCode::ParseError, "cannot open scenario file " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

} // namespace chainsim
