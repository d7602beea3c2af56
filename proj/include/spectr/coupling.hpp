#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spectr/prob.hpp"
#include "spectr/rng.hpp"

namespace spectr {

/// Outcome of a token-level selection: the emitted token, plus which draft it
/// came from when a draft was accepted.
struct Selection {
  TokenId token = 0;
  std::optional<std::size_t> accepted_index;
  bool accepted() const noexcept { return accepted_index.has_value(); }
};

// ---------------------------------------------------------------------------
// Single draft: maximal coupling.

/// Accepts `draft` with probability min(1, q/p), otherwise samples the
/// maximal-coupling residual. If draft ~ p the returned token is exactly ~ q.
template <RandomSource R>
Selection maximal_coupling_select(const ProbVector& p, const ProbVector& q, TokenId draft, R& rng) {
  require_same_vocab(p, q);
  const double pd = p.at(draft);
  if (pd <= 0.0) {
    throw Error(ErrorKind::invalid_draft, "draft token " + std::to_string(draft) +
                                              " has zero probability under the draft distribution");
  }
  const double ratio = std::min(1.0, q[draft] / pd);
  if (rng.bernoulli(ratio)) return {draft, 0};
  return {static_cast<TokenId>(rng.draw(residual_maximal(p, q))), std::nullopt};
}

// ---------------------------------------------------------------------------
// K-SEQ: sequential acceptance with division factor gamma.

/// beta(gamma) = sum_x min(p(x), q(x)/gamma).
inline double kseq_beta(const ProbVector& p, const ProbVector& q, double gamma) {
  require_same_vocab(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], q[i] / gamma);
  return s;
}

/// f(gamma) = 1 - (1 - beta)^k - gamma * beta; decreasing on [1, inf), and
/// gamma is valid exactly when f(gamma) <= 0.
inline double kseq_f(const ProbVector& p, const ProbVector& q, std::size_t k, double gamma) {
  const double beta = kseq_beta(p, q, gamma);
  return 1.0 - std::pow(1.0 - beta, static_cast<double>(k)) - gamma * beta;
}

inline constexpr double kDefaultGammaDelta = 1e-9;

/// Smallest valid division factor, located by bisection on [1, k].
///
/// The result is the upper end of the final bracket, so it lies in
/// [gamma*, gamma* + delta] and is always valid. Identical distributions give
/// 1 exactly; disjoint supports have no meaningful gamma* and are rejected.
inline double kseq_gamma_star(const ProbVector& p, const ProbVector& q, std::size_t k,
                              double delta = kDefaultGammaDelta) {
  if (k == 0) throw Error(ErrorKind::domain, "draft count k must be at least 1");
  if (!(delta > 0.0)) throw Error(ErrorKind::domain, "bisection accuracy must be positive");
  const double tv = tv_distance(p, q);
  if (tv <= kNegativeTolerance) return 1.0;
  if (tv >= 1.0 - kNegativeTolerance) {
    throw Error(ErrorKind::degenerate_support, "p and q have disjoint supports (tv = 1)");
  }
  if (k == 1 || kseq_f(p, q, k, 1.0) <= 0.0) return 1.0;
  double lo = 1.0;
  double hi = static_cast<double>(k);
  while (hi - lo > delta) {
    const double mid = 0.5 * (lo + hi);
    if (kseq_f(p, q, k, mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

struct KseqParams {
  std::size_t k = 1;
  double gamma = 1.0;
  double beta = 1.0;
  double p_acc = 1.0;
  /// Absent when p_acc == 1 (the residual is never reached).
  std::optional<ProbVector> residual;
};

/// beta, p_acc = 1 - (1-beta)^k and the K-SEQ residual
/// (q - min(p, q/gamma) * p_acc / beta) / (1 - p_acc).
inline KseqParams kseq_params(const ProbVector& p, const ProbVector& q, std::size_t k, double gamma) {
  require_same_vocab(p, q);
  if (k == 0) throw Error(ErrorKind::domain, "draft count k must be at least 1");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) {
    throw Error(ErrorKind::invalid_gamma, "gamma must be a finite value >= 1");
  }
  KseqParams out;
  out.k = k;
  out.gamma = gamma;
  out.beta = kseq_beta(p, q, gamma);
  out.p_acc = 1.0 - std::pow(1.0 - out.beta, static_cast<double>(k));
  const double reject = 1.0 - out.p_acc;
  if (reject <= kNegativeTolerance) return out;

  const double scale = out.beta > 0.0 ? out.p_acc / out.beta : 0.0;
  std::vector<double> res(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    res[i] = (q[i] - std::min(p[i], q[i] / gamma) * scale) / reject;
    if (res[i] < -kNegativeTolerance) {
      throw Error(ErrorKind::invalid_gamma,
                  "gamma = " + format_real(gamma) + " is below gamma* for k = " + std::to_string(k) +
                      " (residual mass " + format_real(res[i]) + " at token " + std::to_string(i) + ")");
    }
  }
  out.residual = ProbVector::normalized(std::move(res));
  return out;
}

/// Scans drafts in order, accepting X_i with probability min(1, q/(gamma p));
/// falls back to the residual when every draft is rejected.
template <RandomSource R>
Selection kseq_select(const KseqParams& params, const ProbVector& p, const ProbVector& q,
                      std::span<const TokenId> drafts, R& rng) {
  if (drafts.size() != params.k) {
    throw Error(ErrorKind::dimension, "K-SEQ parameters were computed for k = " +
                                          std::to_string(params.k) + " but " +
                                          std::to_string(drafts.size()) + " drafts were supplied");
  }
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const TokenId x = drafts[i];
    const double px = p.at(x);
    if (px <= 0.0) {
      throw Error(ErrorKind::invalid_draft,
                  "draft token " + std::to_string(x) + " has zero probability under p");
    }
    if (rng.bernoulli(std::min(1.0, q[x] / (params.gamma * px)))) return {x, i};
  }
  // Only reachable with p_acc < 1; a missing residual means p_acc rounded to 1.
  if (!params.residual) return {static_cast<TokenId>(rng.draw(q)), std::nullopt};
  return {static_cast<TokenId>(rng.draw(*params.residual)), std::nullopt};
}

template <RandomSource R>
Selection kseq_select(const ProbVector& p, const ProbVector& q, std::span<const TokenId> drafts,
                      double gamma, R& rng) {
  return kseq_select(kseq_params(p, q, drafts.size(), gamma), p, q, drafts, rng);
}

/// Exact law of the K-SEQ output token; equals q whenever gamma >= gamma*.
inline ProbVector kseq_output_marginal(const ProbVector& p, const ProbVector& q, std::size_t k,
                                       double gamma) {
  const KseqParams kp = kseq_params(p, q, k, gamma);
  std::vector<double> out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    // sum_{j<k} (1-beta)^j * min(p, q/gamma), written in closed form.
    if (kp.beta > 0.0) out[i] = std::min(p[i], q[i] / gamma) * kp.p_acc / kp.beta;
    if (kp.residual) out[i] += (1.0 - kp.p_acc) * (*kp.residual)[i];
  }
  return ProbVector(std::move(out));
}

/// Probability that some draft is accepted during the scan, 1 - (1-beta)^k.
inline double kseq_acceptance(const ProbVector& p, const ProbVector& q, std::size_t k, double gamma) {
  return kseq_params(p, q, k, gamma).p_acc;
}

// ---------------------------------------------------------------------------
// Closed forms.

/// Optimal acceptance for Bernoulli pairs:
/// min(q, 1-(1-p)^k) + min(1-q, 1-p^k), with p, q the head probabilities.
inline double alpha_bernoulli_closed_form(double p_head, double q_head, std::size_t k) {
  if (!(p_head >= 0.0 && p_head <= 1.0) || !(q_head >= 0.0 && q_head <= 1.0)) {
    throw Error(ErrorKind::domain, "Bernoulli parameters must lie in [0,1]");
  }
  if (k == 0) throw Error(ErrorKind::domain, "draft count k must be at least 1");
  const double kk = static_cast<double>(k);
  return std::min(q_head, 1.0 - std::pow(1.0 - p_head, kk)) +
         std::min(1.0 - q_head, 1.0 - std::pow(p_head, kk));
}

/// Optimal acceptance for p = U(d), q = U(d/r): 1 - (1 - 1/r)^k.
inline double alpha_uniform_closed_form(std::size_t d, double r, std::size_t k) {
  if (d == 0 || k == 0) throw Error(ErrorKind::domain, "d and k must be positive");
  if (!(r >= 1.0) || !std::isfinite(r)) throw Error(ErrorKind::domain, "r must be >= 1");
  const double support = static_cast<double>(d) / r;
  if (std::abs(support - std::round(support)) > 1e-9 || std::round(support) < 1.0) {
    throw Error(ErrorKind::domain, "d / r must be a positive integer");
  }
  return 1.0 - std::pow(1.0 - 1.0 / r, static_cast<double>(k));
}

/// gamma* for the uniform pair: r (1 - (1 - 1/r)^k).
inline double gamma_star_uniform_closed_form(double r, std::size_t k) {
  return r * (1.0 - std::pow(1.0 - 1.0 / r, static_cast<double>(k)));
}

// ---------------------------------------------------------------------------

enum class AcceptanceMethod { maximal, kseq, otm_lp, upper_bound, closed_form };

inline const char* to_string(AcceptanceMethod m) {
  switch (m) {
    case AcceptanceMethod::maximal: return "maximal";
    case AcceptanceMethod::kseq: return "kseq";
    case AcceptanceMethod::otm_lp: return "otm";
    case AcceptanceMethod::upper_bound: return "upper";
    case AcceptanceMethod::closed_form: return "closed_form";
  }
  return "unknown";
}

struct AcceptanceReport {
  AcceptanceMethod method = AcceptanceMethod::maximal;
  double alpha = 0.0;
  std::size_t k = 1;
  std::optional<double> gamma;                  // kseq
  std::optional<std::vector<TokenId>> subset;   // upper bound witness
};

}  // namespace spectr
