#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mgm {

// splitmix64 finalizer; used to mix seeds for independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives a stream seed from a root seed and a list of tags (purpose id,
// epoch, step, sample index, ...). Stateless so a resumed run can rebuild
// the exact stream any step used.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(root);
  for (std::uint64_t t : tags) {
    s = mix64(s ^ t);
  }
  return s;
}

// Seeded RNG with hand-rolled distributions so draws are identical across
// platforms and never depend on libstdc++ internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Unbiased integer in [0,n), n >= 1.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (no cached spare, so the draw sequence
  // is a pure function of how many calls were made).
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Standard Gumbel: -log(-log(U)).
  double gumbel() {
    const double u = uniform_pos();
    return -std::log(-std::log(u) + 1e-300);
  }

  // First k entries of a uniform random permutation of [0,n).
  std::vector<int> sample_without_replacement(int n, int k);

  // Uniform random permutation of [0,n).
  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace mgm
