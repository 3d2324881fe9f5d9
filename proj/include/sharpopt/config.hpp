#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sharpopt {

inline constexpr const char* kToolVersion = "0.1.0";

/// key=value lines sorted by key; the exact text embedded in every summary.
std::string canonical_config(std::vector<std::pair<std::string, std::string>> entries);

/// FNV-1a (64-bit) of the canonical text, as 16 hex digits.
std::string config_hash(const std::string& canonical);

}  // namespace sharpopt
