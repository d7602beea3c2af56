#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "spectr/coupling.hpp"
#include "spectr/drafts.hpp"
#include "spectr/otm.hpp"
#include "spectr/toy_lm.hpp"

namespace spectr {

enum class GammaPolicy {
  /// Bisect for gamma* at every step with the current candidate count.
  recompute,
  /// Skip the search and use gamma = max(initial K, current k), which is
  /// always at least gamma*.
  initial_k,
};

struct SelectionMethod {
  enum class Kind { maximal, kseq, otm_lp };
  Kind kind = Kind::kseq;
  GammaPolicy gamma_policy = GammaPolicy::recompute;
  double gamma_delta = kDefaultGammaDelta;
  std::size_t tuple_cap = kDefaultTupleCap;

  static SelectionMethod maximal() { return {Kind::maximal}; }
  static SelectionMethod kseq(GammaPolicy policy = GammaPolicy::recompute) {
    return {Kind::kseq, policy};
  }
  static SelectionMethod otm_lp(std::size_t cap = kDefaultTupleCap) {
    return {Kind::otm_lp, GammaPolicy::recompute, kDefaultGammaDelta, cap};
  }
};

inline const char* to_string(SelectionMethod::Kind k) {
  switch (k) {
    case SelectionMethod::Kind::maximal: return "maximal";
    case SelectionMethod::Kind::kseq: return "kseq";
    case SelectionMethod::Kind::otm_lp: return "otm";
  }
  return "unknown";
}

inline SelectionMethod::Kind parse_selection_kind(const std::string& s) {
  if (s == "maximal") return SelectionMethod::Kind::maximal;
  if (s == "kseq") return SelectionMethod::Kind::kseq;
  if (s == "otm" || s == "otm_lp") return SelectionMethod::Kind::otm_lp;
  throw Error(ErrorKind::validation, "unknown selection method '" + s + "'");
}

/// gamma used by K-SEQ for one token-level step.
inline double kseq_step_gamma(const ProbVector& p, const ProbVector& q, std::size_t k,
                              std::size_t initial_k, const SelectionMethod& method) {
  if (method.gamma_policy == GammaPolicy::initial_k) {
    return static_cast<double>(std::max(k, initial_k));
  }
  // Disjoint supports: every draft is rejected for any gamma, and gamma = 1
  // leaves the residual equal to q.
  if (tv_distance(p, q) >= 1.0 - kNegativeTolerance) return 1.0;
  return kseq_gamma_star(p, q, k, method.gamma_delta);
}

/// One token-level draft selection from p^{(x)k} to q.
template <RandomSource R>
Selection select_token(const SelectionMethod& method, const ProbVector& p, const ProbVector& q,
                       std::span<const TokenId> drafts, std::size_t initial_k, R& rng) {
  switch (method.kind) {
    case SelectionMethod::Kind::maximal:
      if (drafts.size() != 1) {
        throw Error(ErrorKind::structural, "maximal coupling needs exactly one draft per step, got " +
                                               std::to_string(drafts.size()));
      }
      return maximal_coupling_select(p, q, drafts[0], rng);
    case SelectionMethod::Kind::kseq: {
      const double gamma = kseq_step_gamma(p, q, drafts.size(), initial_k, method);
      return kseq_select(kseq_params(p, q, drafts.size(), gamma), p, q, drafts, rng);
    }
    case SelectionMethod::Kind::otm_lp: {
      const OtmSolution sol = otm_lp_solve(p, q, drafts.size(), method.tuple_cap);
      return otm_select(sol.plan, drafts, rng);
    }
  }
  throw Error(ErrorKind::internal, "unhandled selection method");
}

struct DraftSelectionResult {
  TokenSeq new_tokens;
  std::size_t accepted = 0;  // draft tokens kept, L' in [0, L]
  bool bonus = false;        // extra large-model token after full acceptance
};

/// Recursive sequence-level selection over a draft set.
///
/// At each depth the candidates are the children of the surviving nodes;
/// their tokens are i.i.d. draws from the draft conditional of the shared
/// prefix, so a token-level plan for |candidates| drafts applies. Surviving
/// nodes are those whose token equals the selected one (all of them are
/// kept). Ends on the first empty survivor set, or after depth L with a bonus
/// token from the large model. Emits between 1 and L+1 tokens.
template <RandomSource R>
DraftSelectionResult draft_selection(const TokenSeq& context, const DraftSet& drafts, const ToyLm& big,
                                     const ToyLm& small, const SelectionMethod& method, R& rng) {
  const std::size_t length = drafts.length();
  if (length == 0 || drafts.node(DraftSet::root()).children.empty()) {
    throw Error(ErrorKind::structural, "draft set is empty");
  }
  if (drafts.context() != context) {
    throw Error(ErrorKind::structural, "draft set was built for a different context");
  }
  if (big.vocab_size() != small.vocab_size()) {
    throw Error(ErrorKind::dimension, "large and draft models disagree on vocabulary size");
  }

  DraftSelectionResult out;
  TokenSeq prefix = context;
  std::vector<std::size_t> survivors{DraftSet::root()};
  const std::size_t initial_k = drafts.node(DraftSet::root()).children.size();
  for (std::size_t depth = 0; depth < length; ++depth) {
    std::vector<std::size_t> candidates;
    for (std::size_t s : survivors) {
      const auto& ch = drafts.node(s).children;
      candidates.insert(candidates.end(), ch.begin(), ch.end());
    }
    if (candidates.empty()) {
      throw Error(ErrorKind::structural, "drafts of mixed length: a branch ends at depth " +
                                             std::to_string(depth));
    }
    std::vector<TokenId> tokens;
    tokens.reserve(candidates.size());
    for (std::size_t c : candidates) tokens.push_back(drafts.node(c).token);

    const ProbVector& p = drafts.conditional(survivors.front());
    const ProbVector q = big.next_dist(prefix);
    const Selection sel = select_token(method, p, q, tokens, initial_k, rng);
    out.new_tokens.push_back(sel.token);
    prefix.push_back(sel.token);

    std::vector<std::size_t> next;
    for (std::size_t c : candidates) {
      if (drafts.node(c).token == sel.token) next.push_back(c);
    }
    if (next.empty()) return out;
    ++out.accepted;
    if (depth + 1 == length) {
      for (std::size_t n : next) {
        if (!drafts.node(n).children.empty()) {
          throw Error(ErrorKind::structural, "drafts of mixed length: branch continues past L");
        }
      }
      out.new_tokens.push_back(static_cast<TokenId>(rng.draw(big.next_dist(prefix))));
      out.bonus = true;
      return out;
    }
    survivors = std::move(next);
  }
  return out;
}

struct DraftingScheme {
  DraftConstruction kind = DraftConstruction::iid;
  std::vector<std::size_t> factors;  // tree only

  static DraftingScheme iid() { return {}; }
  static DraftingScheme tree(std::vector<std::size_t> f) { return {DraftConstruction::tree, std::move(f)}; }
};

struct IterationRecord {
  std::size_t drafts = 0;        // K (leaf count for trees)
  std::size_t draft_length = 0;  // L
  std::size_t accepted = 0;      // L'
  bool extra_token = false;

  std::size_t emitted() const noexcept { return accepted + 1; }
  friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct DecodeTrace {
  std::string algorithm;
  TokenSeq prompt;
  TokenSeq tokens;  // emitted after the prompt
  std::size_t serial_big_calls = 0;
  std::vector<IterationRecord> per_iteration;
  double simulated_time = 0.0;

  friend bool operator==(const DecodeTrace&, const DecodeTrace&) = default;
};

/// Per iteration: one large-model call, L serial draft-model steps (the
/// batch of drafts runs in parallel), plus fixed overhead.
inline double simulated_time(const DecodeTrace& trace, const CostModel& cost) {
  cost.validate();
  double t = 0.0;
  for (const auto& it : trace.per_iteration) {
    t += cost.big_call_cost + cost.small_call_cost * static_cast<double>(it.draft_length) +
         cost.overhead_per_iter;
  }
  return t;
}

/// Decoded tokens per serial large-model call.
inline double block_efficiency(const DecodeTrace& trace) {
  if (trace.serial_big_calls == 0) {
    throw Error(ErrorKind::undefined, "block efficiency of a trace with no large-model calls");
  }
  return static_cast<double>(trace.tokens.size()) / static_cast<double>(trace.serial_big_calls);
}

/// Simulated baseline time (one large call per token) over simulated trace time.
inline double simulated_speedup(const DecodeTrace& trace, const CostModel& cost) {
  const double t = simulated_time(trace, cost);
  if (!(cost.big_call_cost > 0.0) || !(t > 0.0)) {
    throw Error(ErrorKind::undefined, "speedup under a zero-cost model");
  }
  return static_cast<double>(trace.tokens.size()) * cost.big_call_cost / t;
}

/// Plain autoregressive sampling from the large model: one serial call per token.
template <RandomSource R>
DecodeTrace baseline_decode(const ToyLm& big, const TokenSeq& prompt, std::size_t total_tokens, R& rng,
                            const CostModel& cost = {}) {
  DecodeTrace trace;
  trace.algorithm = "baseline";
  trace.prompt = prompt;
  TokenSeq ctx = prompt;
  for (std::size_t i = 0; i < total_tokens; ++i) {
    const TokenId t = static_cast<TokenId>(rng.draw(big.next_dist(ctx)));
    ctx.push_back(t);
    trace.tokens.push_back(t);
    ++trace.serial_big_calls;
    trace.per_iteration.push_back({0, 0, 0, false});
  }
  trace.simulated_time = simulated_time(trace, cost);
  return trace;
}

struct DecodeConfig {
  std::size_t k = 1;       // drafts per iteration (ignored for trees)
  std::size_t length = 4;  // L (ignored for trees)
  SelectionMethod method = SelectionMethod::kseq();
  DraftingScheme drafting = DraftingScheme::iid();
  CostModel cost{};
};

inline std::string algorithm_label(const DecodeConfig& cfg) {
  if (cfg.drafting.kind == DraftConstruction::iid && cfg.k == 1) return "speculative";
  return std::string("spectr_") + to_string(cfg.method.kind);
}

/// Draft, score in one parallel large-model call, select; repeat until at
/// least `total_tokens` tokens are emitted (the last iteration may overshoot).
template <RandomSource R>
DecodeTrace spectr_decode(const ToyLm& big, const ToyLm& small, const TokenSeq& prompt,
                          std::size_t total_tokens, const DecodeConfig& cfg, R& rng) {
  if (total_tokens == 0) throw Error(ErrorKind::domain, "total_tokens must be at least 1");
  std::size_t k = cfg.k, length = cfg.length;
  if (cfg.drafting.kind == DraftConstruction::tree) {
    if (cfg.drafting.factors.empty()) throw Error(ErrorKind::domain, "tree drafting needs factors");
    length = cfg.drafting.factors.size();
    k = 1;
    for (std::size_t f : cfg.drafting.factors) k *= f;
  }
  if (k == 0 || length == 0) throw Error(ErrorKind::domain, "K and L must be at least 1");
  if (cfg.method.kind == SelectionMethod::Kind::maximal && k != 1) {
    throw Error(ErrorKind::domain, "maximal coupling selection requires K = 1");
  }

  DecodeTrace trace;
  trace.algorithm = algorithm_label(cfg);
  trace.prompt = prompt;
  TokenSeq ctx = prompt;
  for (std::uint64_t iter = 0; trace.tokens.size() < total_tokens; ++iter) {
    R iter_rng = rng.fork(iter);
    R draft_rng = iter_rng.fork(0);
    R select_rng = iter_rng.fork(1);
    const DraftSet drafts = cfg.drafting.kind == DraftConstruction::tree
                                ? build_prefix_tree_drafts(small, ctx, cfg.drafting.factors, draft_rng)
                                : sample_iid_drafts(small, ctx, k, length, draft_rng);
    ++trace.serial_big_calls;
    const DraftSelectionResult res = draft_selection(ctx, drafts, big, small, cfg.method, select_rng);
    ctx.insert(ctx.end(), res.new_tokens.begin(), res.new_tokens.end());
    trace.tokens.insert(trace.tokens.end(), res.new_tokens.begin(), res.new_tokens.end());
    trace.per_iteration.push_back({k, length, res.accepted, res.bonus});
  }
  trace.simulated_time = simulated_time(trace, cfg.cost);
  return trace;
}

}  // namespace spectr
