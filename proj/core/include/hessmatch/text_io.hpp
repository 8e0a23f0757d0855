#ifndef HESSMATCH_TEXT_IO_HPP
#define HESSMATCH_TEXT_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

// Decimal with 17 significant digits; round-trips binary64 exactly.
std::string g17(double x);

std::string join_g17(const Vec& v);
Vec parse_reals(const std::string& line);
std::vector<std::string> split_ws(const std::string& line);

// Writes content to path atomically (temp file in the same directory,
// then rename).
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// FNV-1a 64-bit hash of a file's bytes.
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const std::string& bytes);

}  // namespace hm

#endif
