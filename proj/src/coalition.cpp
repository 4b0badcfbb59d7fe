#include "onshap/coalition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace onshap {

Coalition Coalition::full(std::size_t n) {
  Coalition s(n);
  for (std::size_t i = 0; i < n; ++i) s.insert(i);
  return s;
}

Coalition Coalition::from_bits(std::size_t n, std::uint64_t bits) {
  if (n > 64) throw UsageError("from_bits supports at most 64 features");
  if (n < 64 && (bits >> n) != 0) throw UsageError("coalition bits exceed the feature count");
  Coalition s(n);
  if (n > 0) s.words_[0] = bits;
  return s;
}

Coalition Coalition::from_indices(std::size_t n, const std::vector<std::size_t>& members) {
  Coalition s(n);
  for (std::size_t i : members) s.insert(i);
  return s;
}

void Coalition::insert(std::size_t i) {
  if (i >= n_) throw UsageError("feature index " + std::to_string(i) + " outside coalition");
  words_[i >> 6] |= std::uint64_t{1} << (i & 63);
}

std::size_t Coalition::size() const {
  std::size_t count = 0;
  for (std::uint64_t w : words_) count += static_cast<std::size_t>(std::popcount(w));
  return count;
}

std::vector<std::size_t> Coalition::members() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::string Coalition::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t digits = std::max<std::size_t>(1, (n_ + 3) / 4);
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    const std::size_t bit = 4 * d;
    unsigned nibble = 0;
    if (bit < n_) nibble = static_cast<unsigned>((words_[bit >> 6] >> (bit & 63)) & 0xF);
    out[digits - 1 - d] = kDigits[nibble];
  }
  return out;
}

Coalition Coalition::from_hex(std::size_t n, std::string_view hex) {
  Coalition s(n);
  std::size_t bit = 0;
  for (auto it = hex.rbegin(); it != hex.rend(); ++it, bit += 4) {
    const char c = *it;
    unsigned nibble;
    if (c >= '0' && c <= '9') {
      nibble = static_cast<unsigned>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      nibble = static_cast<unsigned>(c - 'a' + 10);
    } else if (c >= 'A' && c <= 'F') {
      nibble = static_cast<unsigned>(c - 'A' + 10);
    } else {
      throw DataError("invalid hex digit in coalition '" + std::string(hex) + "'");
    }
    for (unsigned b = 0; b < 4; ++b) {
      if ((nibble >> b) & 1U) {
        if (bit + b >= n) throw DataError("coalition '" + std::string(hex) + "' exceeds n");
        s.insert(bit + b);
      }
    }
  }
  return s;
}

void apply_mask(const double* x, const Coalition& s, double* out) {
  for (std::size_t i = 0; i < s.n(); ++i) out[i] = s.contains(i) ? x[i] : kMaskSentinel;
}

Matrix masked_rows(const Matrix& points, const std::vector<Coalition>& coalitions) {
  Matrix out(points.rows(), points.cols());
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    apply_mask(points.row(r).data(), coalitions[static_cast<std::size_t>(r)], out.row(r).data());
  }
  return out;
}

Coalition sample_shapley_coalition(std::size_t n, Rng& rng) {
  if (n == 0) return Coalition(0);
  const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  const std::size_t k = cut + std::uniform_int_distribution<std::size_t>(0, 1)(rng);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Coalition s(n);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(order[i], order[std::uniform_int_distribution<std::size_t>(i, n - 1)(rng)]);
    s.insert(order[i]);
  }
  return s;
}

double shapley_coalition_probability(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double size_prob = (k == 0 || k == n) ? 0.5 / static_cast<double>(n) : 1.0 / static_cast<double>(n);
  const double log_choose = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                            std::lgamma(static_cast<double>(n - k) + 1);
  return size_prob * std::exp(-log_choose);
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  }
  return order;
}

}  // namespace onshap
