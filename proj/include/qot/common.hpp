#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qot {

// Malformed input files (topology, dataset, config). Message carries the
// line number where applicable.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations on values (bad arguments, unknown ids, ...).
class ValueError : public std::runtime_error {
public:
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

// FNV-1a, used for topology/config fingerprints embedded in output files.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fingerprint_hex(std::uint64_t h);

} // namespace qot
