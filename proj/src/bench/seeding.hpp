#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace covbench::bench {

using SeedLabel = std::variant<std::string, int64_t>;

// Collision-resistant derivation of child seeds from a master seed and a
// label path. The encoding is injective (type tags + length prefixes) and the
// hash is fixed here, independent of platform or standard library.
uint64_t derive_seed(uint64_t master_seed, const std::vector<SeedLabel>& labels);

uint64_t derive_seed(uint64_t master_seed, std::initializer_list<SeedLabel> labels);

// 64-bit avalanche mix (splitmix64 finalizer).
uint64_t mix64(uint64_t x);

}  // namespace covbench::bench
