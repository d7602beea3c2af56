#pragma once

#include <concepts>
#include <cstdint>

#include "spectr/prob.hpp"

namespace spectr {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Two rounds so that (key, counter) pairs differing in one bit decorrelate.
inline constexpr std::uint64_t mix2(std::uint64_t key, std::uint64_t counter) noexcept {
  return splitmix64(splitmix64(key ^ 0x6a09e667f3bcc909ULL) + counter * 0xd1b54a32d192ed03ULL);
}

}  // namespace detail

/// Inverse-CDF lookup: the token whose left-closed interval [c_{i-1}, c_i)
/// contains `u`. Zero-mass tokens own empty intervals and are never returned.
inline TokenId inverse_cdf(const ProbVector& dist, double u) {
  double acc = 0.0;
  TokenId last_positive = 0;
  for (TokenId i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    acc += dist[i];
    last_positive = i;
    if (u < acc) return i;
  }
  // u fell past a cumulative sum that rounded below one.
  return last_positive;
}

/// Counter-based generator: the i-th draw is a pure function of (key, i), and
/// fork(id) derives an independent stream without touching this one.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

  std::uint64_t next_u64() noexcept { return detail::mix2(key_, counter_++); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  TokenId draw(const ProbVector& dist) { return inverse_cdf(dist, uniform()); }

  /// True with probability exactly `p` (for p in [0,1]).
  bool bernoulli(double p) { return uniform() < p; }

  RngStream fork(std::uint64_t id) const noexcept {
    RngStream child(0);
    child.key_ = detail::mix2(key_ ^ 0xa0761d6478bd642fULL, id);
    child.counter_ = 0;
    return child;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Randomness interface consumed by every stochastic algorithm. RngStream is
/// the production model; tests plug in an exhaustive enumerator.
template <class R>
concept RandomSource = requires(R& r, const R& cr, const ProbVector& d, double p) {
  { r.draw(d) } -> std::convertible_to<TokenId>;
  { r.bernoulli(p) } -> std::same_as<bool>;
  { cr.fork(std::uint64_t{}) } -> std::same_as<R>;
};

static_assert(RandomSource<RngStream>);

/// Draws one token by inverse CDF, consuming exactly one uniform.
inline TokenId sample(const ProbVector& dist, RngStream& rng) { return rng.draw(dist); }

}  // namespace spectr
