#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>

namespace bsldm {

// FNV-1a 64-bit over a canonical string. Used to fingerprint configuration
// subsets so that mixing artifacts from incompatible runs is detectable.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline std::string fingerprint_hex(const std::string& s) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(s);
    return os.str();
}

}  // namespace bsldm
