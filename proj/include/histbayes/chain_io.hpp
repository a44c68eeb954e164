#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "histbayes/error.hpp"
#include "histbayes/samplers.hpp"

namespace histbayes {

/// Shortest-safe round-trip text for a double (17 significant digits).
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// CSV with header `chain,draw,<param>...`, one row per draw.
inline void write_chains_csv(std::ostream& os, const std::vector<Chain>& chains) {
    if (chains.empty()) throw EmptyChainError("no chains to write");
    os << "chain,draw";
    for (const auto& name : chains.front().param_names) os << ',' << name;
    os << '\n';
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t i = 0; i < chains[c].n_draws; ++i) {
            os << c << ',' << i;
            for (double v : chains[c].row(i)) os << ',' << format_double(v);
            os << '\n';
        }
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw SchemaError("line " + std::to_string(line), "not a number: '" + s + "'");
    return v;
}

}  // namespace detail

/// Reads a file written by write_chains_csv. Only draws and parameter names
/// are recovered; sampler metadata lives in chains_meta.json.
inline std::vector<Chain> read_chains_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("line 1", "empty chains file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    if (header.size() < 3 || header[0] != "chain" || header[1] != "draw")
        throw SchemaError("line 1", "header must be 'chain,draw,<parameters...>'");
    const std::vector<std::string> names(header.begin() + 2, header.end());

    std::map<std::size_t, Chain> by_index;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw SchemaError("line " + std::to_string(lineno), "expected " + std::to_string(header.size()) + " fields");
        const auto c = static_cast<std::size_t>(detail::parse_double(fields[0], lineno));
        auto& chain = by_index[c];
        if (chain.param_names.empty()) {
            chain.param_names = names;
            chain.stream = c;
        }
        const auto draw = static_cast<std::size_t>(detail::parse_double(fields[1], lineno));
        if (draw != chain.n_draws)
            throw SchemaError("line " + std::to_string(lineno), "draws of chain " + std::to_string(c) + " are out of order");
        for (std::size_t k = 2; k < fields.size(); ++k) chain.draws.push_back(detail::parse_double(fields[k], lineno));
        ++chain.n_draws;
    }
    std::vector<Chain> out;
    for (auto& [index, chain] : by_index) out.push_back(std::move(chain));
    if (out.empty()) throw InsufficientDataError("chains file has no draws");
    return out;
}

}  // namespace histbayes
