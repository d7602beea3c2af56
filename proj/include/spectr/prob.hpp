#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spectr/error.hpp"

namespace spectr {

using TokenId = std::uint32_t;

inline constexpr double kSumTolerance = 1e-9;
inline constexpr double kNegativeTolerance = 1e-12;

/// Finite categorical distribution over tokens 0..size()-1.
///
/// Construction validates: entries below -1e-12 are rejected, entries in
/// [-1e-12, 0) are clamped to zero, and the sum must be within 1e-9 of one.
class ProbVector {
 public:
  ProbVector() = default;

  explicit ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) {
      throw Error(ErrorKind::validation, "distribution over an empty vocabulary");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      double& v = probs_[i];
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::validation, "non-finite probability at token " + std::to_string(i));
      }
      if (v < -kNegativeTolerance) {
        throw Error(ErrorKind::validation, "negative probability at token " + std::to_string(i));
      }
      if (v < 0.0) v = 0.0;
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw Error(ErrorKind::validation, "probabilities sum to " + std::to_string(sum));
    }
  }

  ProbVector(std::initializer_list<double> probs) : ProbVector(std::vector<double>(probs)) {}

  /// Clamps rounding-level negatives, then rescales to sum one.
  static ProbVector normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double& w : weights) {
      if (w < -kNegativeTolerance || !std::isfinite(w)) {
        throw Error(ErrorKind::validation, "cannot normalize a negative or non-finite weight");
      }
      if (w < 0.0) w = 0.0;
      sum += w;
    }
    if (!(sum > 0.0)) {
      throw Error(ErrorKind::validation, "cannot normalize an all-zero weight vector");
    }
    for (double& w : weights) w /= sum;
    return ProbVector(std::move(weights));
  }

  static ProbVector uniform(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::domain, "uniform distribution needs a positive size");
    return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  /// Uniform on tokens [0, support) inside a vocabulary of `vocab` tokens.
  static ProbVector uniform_prefix(std::size_t vocab, std::size_t support) {
    if (support == 0 || support > vocab) {
      throw Error(ErrorKind::domain, "uniform support must lie in [1, vocab]");
    }
    std::vector<double> v(vocab, 0.0);
    std::fill_n(v.begin(), support, 1.0 / static_cast<double>(support));
    return ProbVector(std::move(v));
  }

  /// Two-symbol distribution with probability `heads` on token 1.
  static ProbVector bernoulli(double heads) {
    if (!(heads >= 0.0 && heads <= 1.0)) {
      throw Error(ErrorKind::domain, "bernoulli parameter outside [0,1]");
    }
    return ProbVector({1.0 - heads, heads});
  }

  static ProbVector point_mass(std::size_t vocab, TokenId token) {
    if (token >= vocab) throw Error(ErrorKind::domain, "point mass outside vocabulary");
    std::vector<double> v(vocab, 0.0);
    v[token] = 1.0;
    return ProbVector(std::move(v));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](TokenId i) const { return probs_[i]; }
  double at(TokenId i) const {
    if (i >= probs_.size()) {
      throw Error(ErrorKind::domain, "token " + std::to_string(i) + " outside vocabulary of " +
                                         std::to_string(probs_.size()));
    }
    return probs_[i];
  }
  std::span<const double> values() const noexcept { return probs_; }

  auto begin() const noexcept { return probs_.begin(); }
  auto end() const noexcept { return probs_.end(); }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::vector<double> probs_;
};

inline void require_same_vocab(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorKind::dimension, "vocabulary sizes differ: " + std::to_string(p.size()) +
                                          " vs " + std::to_string(q.size()));
  }
}

/// Sum over tokens of min(p(x), q(x)): the acceptance of the maximal coupling.
inline double overlap(const ProbVector& p, const ProbVector& q) {
  require_same_vocab(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], q[i]);
  return s;
}

/// Total-variation distance computed as 1 - sum min(p, q), clamped to [0, 1].
inline double tv_distance(const ProbVector& p, const ProbVector& q) {
  return std::clamp(1.0 - overlap(p, q), 0.0, 1.0);
}

/// Half-L1 form of the total-variation distance.
inline double tv_distance_l1(const ProbVector& p, const ProbVector& q) {
  require_same_vocab(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

/// Residual of the single-draft maximal coupling: (q - min(p,q)) / (1 - sum min(p,q)).
inline ProbVector residual_maximal(const ProbVector& p, const ProbVector& q) {
  require_same_vocab(p, q);
  const double denom = 1.0 - overlap(p, q);
  if (denom <= kSumTolerance) {
    throw Error(ErrorKind::degenerate_residual,
                "p and q coincide; the draft is always accepted and no residual exists");
  }
  std::vector<double> r(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    r[i] = std::max(0.0, q[i] - std::min(p[i], q[i])) / denom;
  }
  return ProbVector::normalized(std::move(r));
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline std::vector<double> parse_reals(std::string_view text, char sep = ',') {
  std::vector<double> out;
  while (!text.empty()) {
    const auto cut = text.find(sep);
    std::string_view item = text.substr(0, cut);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw Error(ErrorKind::validation, "cannot parse number '" + std::string(item) + "'");
    }
    out.push_back(v);
    if (cut == std::string_view::npos) break;
    text.remove_prefix(cut + 1);
  }
  if (out.empty()) throw Error(ErrorKind::validation, "empty number list");
  return out;
}

/// Parses the comma-separated text form, e.g. "0.25,0.75".
inline ProbVector parse_prob_vector(std::string_view text) {
  return ProbVector(parse_reals(text));
}

inline std::string to_string(const ProbVector& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ',';
    s += format_real(p[i]);
  }
  return s;
}

}  // namespace spectr
