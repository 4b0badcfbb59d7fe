#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "onshap/common.hpp"

namespace onshap {

/// Subset S of {0..n-1} stored as a bitmask; no bit at or above n is ever set.
class Coalition {
 public:
  Coalition() = default;
  explicit Coalition(std::size_t n) : n_(n), words_((n + 63) / 64, 0) {}

  static Coalition full(std::size_t n);
  static Coalition from_bits(std::size_t n, std::uint64_t bits);  // n <= 64
  static Coalition from_indices(std::size_t n, const std::vector<std::size_t>& members);

  std::size_t n() const { return n_; }
  bool contains(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1U; }
  void insert(std::size_t i);
  void erase(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::vector<std::size_t> members() const;
  std::uint64_t low_bits() const { return words_.empty() ? 0 : words_[0]; }

  /// Lowercase hex, most significant word first, ceil(n/4) digits.
  std::string to_hex() const;
  static Coalition from_hex(std::size_t n, std::string_view hex);

  bool operator==(const Coalition& other) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Writes x with out-of-coalition slots replaced by the mask sentinel.
void apply_mask(const double* x, const Coalition& s, double* out);
Matrix masked_rows(const Matrix& points, const std::vector<Coalition>& coalitions);

/// Draws a coalition whose size is c + b with c uniform on {0..n-1} and b a
/// fair coin, members uniform given the size. This is the even mixture of the
/// Shapley-weighted S (excluding some feature i) and S with i added.
Coalition sample_shapley_coalition(std::size_t n, Rng& rng);
/// Probability that sample_shapley_coalition returns a given coalition of size k.
double shapley_coalition_probability(std::size_t n, std::size_t k);

/// Uniformly random ordering of {0..n-1}.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace onshap
