#pragma once

// Plain tabular text with a header row and a trailing content digest, plus
// key-value documents for manifests. Every writer is deterministic so
// artifact files are reproducible byte-for-byte from (scenario, seed).

#include "chainsim/errors.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace chainsim {

inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : bytes) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x00000100000001b3ull;
    }
    return h;
}

inline std::string fnv_hex(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

} // namespace detail

// Tab-separated table. The final line is `# digest <fnv1a-64>` over all
// preceding bytes, so any post-hoc edit is detectable.
class TableWriter {
public:
    explicit TableWriter(const std::vector<std::string>& columns) {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) {
                m_out += '\t';
            }
            m_out += columns[i];
        }
        m_out += '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                m_out += '\t';
            }
            m_out += cells[i];
        }
        m_out += '\n';
    }

    std::string finish() const {
        return m_out + "# digest " + detail::fnv_hex(detail::fnv1a(m_out)) + "\n";
    }

private:
    std::string m_out;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    bool digest_ok = false;
};

inline Table parse_table(std::string_view text) {
    Table table;
    const std::size_t marker = text.rfind("# digest ");
    if (marker != std::string_view::npos) {
        const std::string_view content = text.substr(0, marker);
        std::string_view digest_line = text.substr(marker + 9);
        while (!digest_line.empty() && (digest_line.back() == '\n' || digest_line.back() == '\r')) {
            digest_line.remove_suffix(1);
        }
        table.digest_ok = digest_line == detail::fnv_hex(detail::fnv1a(content));
    }
    std::size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t cell_pos = 0;
        while (true) {
            const std::size_t tab = line.find('\t', cell_pos);
            cells.emplace_back(line.substr(
                cell_pos, tab == std::string_view::npos ? std::string_view::npos : tab - cell_pos));
            if (tab == std::string_view::npos) {
                break;
            }
            cell_pos = tab + 1;
        }
        if (header) {
            table.columns = std::move(cells);
            header = false;
        } else {
            table.rows.push_back(std::move(cells));
        }
    }
    return table;
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw SimError(ErrorCode::InvalidValue, "cannot write " + path);
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SimError(ErrorCode::MissingArtifacts, "cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Ordered key-value document (manifest / summary building block).
class KvWriter {
public:
    void put(std::string_view key, std::string_view value) {
        m_out += key;
        m_out += ' ';
        m_out += value;
        m_out += '\n';
    }
    void put(std::string_view key, double value) { put(key, format_double(value)); }
    void put(std::string_view key, std::uint64_t value) { put(key, std::to_string(value)); }
    const std::string& text() const noexcept { return m_out; }

private:
    std::string m_out;
};

inline std::vector<std::pair<std::string, std::string>> parse_kv(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t space = line.find(' ');
        if (space == std::string_view::npos) {
            continue;
        }
        out.emplace_back(std::string(line.substr(0, space)), std::string(line.substr(space + 1)));
    }
    return out;
}

} // namespace chainsim
