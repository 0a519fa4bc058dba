#include "bench/seeding.hpp"

namespace covbench::bench {

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

void hash_bytes(uint64_t& h, const void* p, size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= kFnvPrime;
  }
}

void hash_u64(uint64_t& h, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  hash_bytes(h, b, 8);
}

}  // namespace

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t master_seed, const std::vector<SeedLabel>& labels) {
  uint64_t h = kFnvOffset;
  hash_u64(h, master_seed);
  for (const auto& lab : labels) {
    if (std::holds_alternative<std::string>(lab)) {
      const auto& s = std::get<std::string>(lab);
      hash_u64(h, 1);  // type tag
      hash_u64(h, s.size());
      hash_bytes(h, s.data(), s.size());
    } else {
      hash_u64(h, 2);
      hash_u64(h, static_cast<uint64_t>(std::get<int64_t>(lab)));
    }
  }
  return mix64(h);
}

uint64_t derive_seed(uint64_t master_seed, std::initializer_list<SeedLabel> labels) {
  return derive_seed(master_seed, std::vector<SeedLabel>(labels));
}

}  // namespace covbench::bench
