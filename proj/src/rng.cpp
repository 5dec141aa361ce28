#include "mgm/rng.hpp"

#include <numeric>

#include "mgm/error.hpp"

namespace mgm {

std::vector<int> Rng::sample_without_replacement(int n, int k) {
  if (k < 0 || k > n) {
    throw ContractError("sample_without_replacement: k=" + std::to_string(k) +
                        " outside [0, " + std::to_string(n) + "]");
  }
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset in
  // uniform order.
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<int> Rng::permutation(int n) { return sample_without_replacement(n, n); }

}  // namespace mgm
