#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spectr/coupling.hpp"
#include "spectr/prob.hpp"
#include "spectr/rng.hpp"
#include "spectr/simplex.hpp"

namespace spectr {

inline constexpr std::size_t kDefaultTupleCap = 4096;

/// |vocab|^k, or size_limit when it exceeds `cap`.
inline std::size_t tuple_space_size(std::size_t vocab, std::size_t k, std::size_t cap) {
  if (k == 0) throw Error(ErrorKind::domain, "draft count k must be at least 1");
  std::size_t n = 1;
  for (std::size_t i = 0; i < k; ++i) {
    if (n > cap / vocab) {
      throw Error(ErrorKind::size_limit, "|vocab|^k = " + std::to_string(vocab) + "^" +
                                            std::to_string(k) + " exceeds the tuple cap of " +
                                            std::to_string(cap));
    }
    n *= vocab;
  }
  return n;
}

/// Decodes the lexicographic index of a draft tuple (first draft most significant).
inline std::vector<TokenId> decode_tuple(std::size_t code, std::size_t vocab, std::size_t k) {
  std::vector<TokenId> t(k);
  for (std::size_t i = k; i-- > 0;) {
    t[i] = static_cast<TokenId>(code % vocab);
    code /= vocab;
  }
  return t;
}

inline std::size_t encode_tuple(std::span<const TokenId> tuple, std::size_t vocab) {
  std::size_t code = 0;
  for (TokenId x : tuple) code = code * vocab + x;
  return code;
}

inline double product_mass(const ProbVector& p, std::span<const TokenId> tuple) {
  double m = 1.0;
  for (TokenId x : tuple) m *= p[x];
  return m;
}

inline bool contains(std::span<const TokenId> tuple, TokenId y) {
  return std::find(tuple.begin(), tuple.end(), y) != tuple.end();
}

/// Joint distribution over (draft tuple, output token). Rows cover the
/// draft tuples with positive product mass, in lexicographic order.
class TransportPlan {
 public:
  TransportPlan(std::size_t k, std::size_t vocab) : k_(k), vocab_(vocab) {}

  std::size_t k() const noexcept { return k_; }
  std::size_t vocab_size() const noexcept { return vocab_; }
  std::size_t rows() const noexcept { return codes_.size(); }

  std::span<const TokenId> tuple(std::size_t row) const {
    return {tuples_.data() + row * k_, k_};
  }
  std::span<const double> masses(std::size_t row) const {
    return {mass_.data() + row * vocab_, vocab_};
  }
  double mass(std::size_t row, TokenId y) const { return mass_[row * vocab_ + y]; }

  /// Row index of a tuple, or npos if the tuple has zero product mass.
  std::size_t find_row(std::span<const TokenId> tuple) const {
    const std::size_t code = encode_tuple(tuple, vocab_);
    const auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
    if (it == codes_.end() || *it != code) return npos;
    return static_cast<std::size_t>(it - codes_.begin());
  }

  /// Conditional law of the output token given the drafts: pi(x, .) / P(x).
  ProbVector conditional(std::span<const TokenId> tuple) const {
    const std::size_t row = find_row(tuple);
    if (row == npos) {
      throw Error(ErrorKind::invalid_draft, "draft tuple has zero probability under p^k");
    }
    auto m = masses(row);
    return ProbVector::normalized({m.begin(), m.end()});
  }

  /// Probability that the output token is one of the drafts.
  double acceptance() const {
    double a = 0.0;
    for (std::size_t r = 0; r < rows(); ++r) {
      const auto t = tuple(r);
      for (TokenId y = 0; y < vocab_; ++y) {
        if (contains(t, y)) a += mass(r, y);
      }
    }
    return a;
  }

  /// Largest violation of: nonnegativity, row sums = prod p, column sums = q.
  double max_marginal_violation(const ProbVector& p, const ProbVector& q) const {
    double worst = 0.0;
    std::vector<double> col(vocab_, 0.0);
    for (std::size_t r = 0; r < rows(); ++r) {
      double row_sum = 0.0;
      for (TokenId y = 0; y < vocab_; ++y) {
        const double v = mass(r, y);
        worst = std::max(worst, -v);
        row_sum += v;
        col[y] += v;
      }
      worst = std::max(worst, std::abs(row_sum - product_mass(p, tuple(r))));
    }
    for (TokenId y = 0; y < vocab_; ++y) worst = std::max(worst, std::abs(col[y] - q[y]));
    return worst;
  }

  void add_row(std::span<const TokenId> tuple, std::vector<double> masses) {
    codes_.push_back(encode_tuple(tuple, vocab_));
    tuples_.insert(tuples_.end(), tuple.begin(), tuple.end());
    mass_.insert(mass_.end(), masses.begin(), masses.end());
  }

  double& mass_ref(std::size_t row, TokenId y) { return mass_[row * vocab_ + y]; }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

 private:
  std::size_t k_, vocab_;
  std::vector<std::size_t> codes_;
  std::vector<TokenId> tuples_;
  std::vector<double> mass_;
};

/// CSV with header `draft_tuple,output_token,mass`; tuples hyphen-joined.
/// Zero-mass cells are omitted.
inline void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  os << "draft_tuple,output_token,mass\n";
  for (std::size_t r = 0; r < plan.rows(); ++r) {
    std::string key;
    for (TokenId x : plan.tuple(r)) {
      if (!key.empty()) key += '-';
      key += std::to_string(x);
    }
    for (TokenId y = 0; y < plan.vocab_size(); ++y) {
      const double m = plan.mass(r, y);
      if (m > 0.0) os << key << ',' << y << ',' << format_real(m) << '\n';
    }
  }
}

struct OtmSolution {
  TransportPlan plan;
  double alpha = 0.0;
  std::size_t pivots = 0;
};

/// Optimal transport from p^{(x)k} to q under the membership cost
/// 1{y not among the drafts}; returns the optimal plan and alpha = 1 - cost.
///
/// Only the zero-cost cells (y a member of the tuple) enter the LP: they are
/// the variables of a max-flow style program with row capacities prod p and
/// column capacities q. Leftover row and column mass is then paired by the
/// product coupling, which completes a plan with exactly the prescribed
/// marginals. Any completion costs exactly the unrouted mass, so the LP
/// optimum is the optimal acceptance.
inline OtmSolution otm_lp_solve(const ProbVector& p, const ProbVector& q, std::size_t k,
                                std::size_t tuple_cap = kDefaultTupleCap) {
  require_same_vocab(p, q);
  const std::size_t vocab = p.size();
  const std::size_t space = tuple_space_size(vocab, k, tuple_cap);

  std::vector<std::vector<TokenId>> tuples;
  std::vector<double> row_mass;
  for (std::size_t code = 0; code < space; ++code) {
    auto t = decode_tuple(code, vocab, k);
    const double m = product_mass(p, t);
    if (m > 0.0) {
      tuples.push_back(std::move(t));
      row_mass.push_back(m);
    }
  }

  struct Var {
    std::size_t row;
    TokenId y;
  };
  std::vector<Var> vars;
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    std::vector<TokenId> distinct = tuples[r];
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (TokenId y : distinct) {
      if (q[y] > 0.0) vars.push_back({r, y});
    }
  }

  const std::size_t m_rows = tuples.size() + vocab;
  lp::Matrix a(m_rows, vars.size());
  std::vector<double> b(m_rows), c(vars.size(), 1.0);
  for (std::size_t r = 0; r < tuples.size(); ++r) b[r] = row_mass[r];
  for (TokenId y = 0; y < vocab; ++y) b[tuples.size() + y] = q[y];
  for (std::size_t j = 0; j < vars.size(); ++j) {
    a(vars[j].row, j) = 1.0;
    a(tuples.size() + vars[j].y, j) = 1.0;
  }

  lp::DenseSimplex simplex(a, b, c);
  const lp::Solution sol = simplex.solve();
  if (sol.status != lp::Status::optimal) {
    throw Error(ErrorKind::internal, "membership-cost LP did not reach optimality");
  }

  std::vector<std::vector<double>> cells(tuples.size(), std::vector<double>(vocab, 0.0));
  for (std::size_t j = 0; j < vars.size(); ++j) cells[vars[j].row][vars[j].y] = sol.x[j];

  std::vector<double> row_left(tuples.size()), col_left(vocab);
  double total_left = 0.0;
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    double s = 0.0;
    for (double v : cells[r]) s += v;
    row_left[r] = std::max(0.0, row_mass[r] - s);
  }
  for (TokenId y = 0; y < vocab; ++y) {
    double s = 0.0;
    for (std::size_t r = 0; r < tuples.size(); ++r) s += cells[r][y];
    col_left[y] = std::max(0.0, q[y] - s);
    total_left += col_left[y];
  }
  if (total_left > 0.0) {
    for (std::size_t r = 0; r < tuples.size(); ++r) {
      if (row_left[r] <= 0.0) continue;
      for (TokenId y = 0; y < vocab; ++y) cells[r][y] += row_left[r] * col_left[y] / total_left;
    }
  }

  OtmSolution out{TransportPlan(k, vocab), 0.0, sol.pivots};
  for (std::size_t r = 0; r < tuples.size(); ++r) out.plan.add_row(tuples[r], std::move(cells[r]));
  out.alpha = std::clamp(out.plan.acceptance(), 0.0, 1.0);
  return out;
}

/// Samples the output token for `drafts` from the plan's conditional row.
template <RandomSource R>
Selection otm_select(const TransportPlan& plan, std::span<const TokenId> drafts, R& rng) {
  if (drafts.size() != plan.k()) {
    throw Error(ErrorKind::dimension, "transport plan was solved for a different draft count");
  }
  const TokenId y = static_cast<TokenId>(rng.draw(plan.conditional(drafts)));
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (drafts[i] == y) return {y, i};
  }
  return {y, std::nullopt};
}

inline constexpr std::size_t kMaxSubsetVocab = 16;

struct UpperBound {
  double alpha_bar = 1.0;
  std::vector<TokenId> witness;  // minimizing subset
};

/// Information-theoretic upper bound on the optimal acceptance:
///   min over subsets W of  sum_{y in W} min(q(y), 1-(1-p(y))^k)
///                        + sum_{x^k} min(prod p(x_i), sum_{y in S(x^k) \ W} q(y)).
/// Ties resolve to the smallest subset by (size, lexicographic order).
inline UpperBound alpha_upper_bound(const ProbVector& p, const ProbVector& q, std::size_t k,
                                    std::size_t tuple_cap = kDefaultTupleCap) {
  require_same_vocab(p, q);
  const std::size_t vocab = p.size();
  if (vocab > kMaxSubsetVocab) {
    throw Error(ErrorKind::size_limit, "subset enumeration needs |vocab| <= 16, got " +
                                           std::to_string(vocab));
  }
  const std::size_t space = tuple_space_size(vocab, k, tuple_cap);

  // Each tuple only matters through its member set and mass.
  std::vector<std::uint32_t> member_mask;
  std::vector<double> tuple_mass;
  for (std::size_t code = 0; code < space; ++code) {
    const auto t = decode_tuple(code, vocab, k);
    const double m = product_mass(p, t);
    if (m <= 0.0) continue;
    std::uint32_t mask = 0;
    for (TokenId x : t) mask |= 1u << x;
    member_mask.push_back(mask);
    tuple_mass.push_back(m);
  }
  std::vector<double> hit(vocab);
  for (TokenId y = 0; y < vocab; ++y) {
    hit[y] = std::min(q[y], 1.0 - std::pow(1.0 - p[y], static_cast<double>(k)));
  }

  auto subset_less = [](std::uint32_t a, std::uint32_t b) {
    const int pa = std::popcount(a), pb = std::popcount(b);
    if (pa != pb) return pa < pb;
    // Lexicographic on ascending element lists: the first differing element
    // is the lowest set bit of a ^ b; whichever subset owns it sorts first.
    const std::uint32_t diff = a ^ b;
    return diff != 0 && (a & (diff & -diff)) != 0;
  };

  UpperBound best;
  std::uint32_t best_mask = 0;
  bool have = false;
  const std::uint32_t full = vocab == 32 ? ~0u : ((1u << vocab) - 1u);
  for (std::uint32_t w = 0;; ++w) {
    double value = 0.0;
    for (TokenId y = 0; y < vocab; ++y) {
      if (w & (1u << y)) value += hit[y];
    }
    for (std::size_t t = 0; t < member_mask.size(); ++t) {
      const std::uint32_t outside = member_mask[t] & ~w;
      double qs = 0.0;
      for (std::uint32_t bits = outside; bits; bits &= bits - 1) qs += q[std::countr_zero(bits)];
      value += std::min(tuple_mass[t], qs);
    }
    if (!have || value < best.alpha_bar - 1e-12 ||
        (value <= best.alpha_bar + 1e-12 && subset_less(w, best_mask))) {
      if (!have || value < best.alpha_bar) best.alpha_bar = value;
      best_mask = w;
      have = true;
    }
    if (w == full) break;
  }
  for (TokenId y = 0; y < vocab; ++y) {
    if (best_mask & (1u << y)) best.witness.push_back(y);
  }
  best.alpha_bar = std::clamp(best.alpha_bar, 0.0, 1.0);
  return best;
}

}  // namespace spectr
