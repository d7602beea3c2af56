#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "spectr/coupling.hpp"
#include "spectr/decode.hpp"
#include "spectr/otm.hpp"

namespace spectr {

/// RandomSource that walks every outcome of a stochastic program.
///
/// Each run replays a recorded prefix of choices and extends it with the
/// first positive-probability option at new choice points; advance() moves to
/// the next unexplored branch depth-first. Zero-probability branches are
/// never visited, and forks share the same choice log (stream identity does
/// not matter when every outcome is enumerated).
class ExhaustiveSource {
 public:
  ExhaustiveSource() : state_(std::make_shared<State>()) {}

  TokenId draw(const ProbVector& dist) {
    std::vector<std::pair<TokenId, double>> opts;
    for (TokenId i = 0; i < dist.size(); ++i) {
      if (dist[i] > 0.0) opts.emplace_back(i, dist[i]);
    }
    const auto& [tok, pr] = opts.at(choose(opts.size()));
    state_->weight *= pr;
    return tok;
  }

  bool bernoulli(double p) {
    std::vector<std::pair<bool, double>> opts;
    if (p > 0.0) opts.emplace_back(true, std::min(p, 1.0));
    if (p < 1.0) opts.emplace_back(false, 1.0 - std::max(p, 0.0));
    const auto& [val, pr] = opts.at(choose(opts.size()));
    state_->weight *= pr;
    return val;
  }

  ExhaustiveSource fork(std::uint64_t) const { return *this; }

  double weight() const noexcept { return state_->weight; }

  void begin_run() {
    state_->pos = 0;
    state_->weight = 1.0;
  }

  /// Moves to the next unexplored path; false once every path was visited.
  bool advance() {
    auto& path = state_->path;
    path.resize(state_->pos);
    while (!path.empty()) {
      if (path.back().first + 1 < path.back().second) {
        ++path.back().first;
        return true;
      }
      path.pop_back();
    }
    return false;
  }

 private:
  std::size_t choose(std::size_t n) {
    auto& s = *state_;
    if (n == 0) throw Error(ErrorKind::internal, "choice point with no positive-probability option");
    if (s.pos < s.path.size()) {
      if (s.path[s.pos].second != n) throw Error(ErrorKind::internal, "non-deterministic replay");
      return s.path[s.pos++].first;
    }
    s.path.emplace_back(0, n);
    ++s.pos;
    return 0;
  }

  struct State {
    std::vector<std::pair<std::size_t, std::size_t>> path;  // (chosen, options)
    std::size_t pos = 0;
    double weight = 1.0;
  };
  std::shared_ptr<State> state_;
};

/// Runs `program` once per outcome and accumulates the exact output law.
template <class Result, class Program>
std::map<Result, double> enumerate_outcomes(Program&& program, std::size_t* paths = nullptr) {
  std::map<Result, double> law;
  ExhaustiveSource src;
  std::size_t count = 0;
  do {
    src.begin_run();
    Result r = program(src);
    law[r] += src.weight();
    ++count;
  } while (src.advance());
  if (paths) *paths = count;
  return law;
}

/// All sequences of `length` tokens after `context` with their chain-rule
/// probability under `model`.
inline std::map<TokenSeq, double> chain_rule_law(const ToyLm& model, const TokenSeq& context,
                                                 std::size_t length) {
  std::map<TokenSeq, double> law{{TokenSeq{}, 1.0}};
  for (std::size_t d = 0; d < length; ++d) {
    std::map<TokenSeq, double> next;
    for (const auto& [seq, pr] : law) {
      TokenSeq ctx = context;
      ctx.insert(ctx.end(), seq.begin(), seq.end());
      const ProbVector dist = model.next_dist(ctx);
      for (TokenId y = 0; y < dist.size(); ++y) {
        if (dist[y] <= 0.0) continue;
        TokenSeq s = seq;
        s.push_back(y);
        next[s] += pr * dist[y];
      }
    }
    law = std::move(next);
  }
  return law;
}

// ---------------------------------------------------------------------------
// Token level.

struct TokenCase {
  ProbVector p, q;
  std::size_t k = 1;
  double gamma = 1.0;
  std::string gamma_label;
};

struct TokenCaseResult {
  TokenCase c;
  double max_error = 0.0;   // max_x |marginal(x) - q(x)|
  std::string failure;      // nonempty when the case raised an error
  bool passed = false;
};

inline ProbVector random_distribution(RngStream& rng, std::size_t vocab) {
  std::vector<double> w(vocab);
  for (double& v : w) v = std::exp(4.0 * rng.uniform());
  return ProbVector::normalized(std::move(w));
}

/// Seeded (p, q, k) draws, each paired with gamma in {gamma*, gamma*+0.1, k}
/// unless `forced_gamma` overrides it.
inline std::vector<TokenCase> default_token_cases(std::uint64_t seed, std::size_t pairs,
                                                  std::size_t k_min, std::size_t k_max,
                                                  std::optional<double> forced_gamma = std::nullopt) {
  std::vector<TokenCase> cases;
  RngStream rng(seed);
  for (std::size_t i = 0; i < pairs; ++i) {
    RngStream r = rng.fork(i);
    const std::size_t vocab = 2 + static_cast<std::size_t>(r.uniform() * 5.0);
    const ProbVector p = random_distribution(r, vocab);
    const ProbVector q = random_distribution(r, vocab);
    const std::size_t k = k_min + static_cast<std::size_t>(r.uniform() * static_cast<double>(k_max - k_min + 1));
    if (forced_gamma) {
      cases.push_back({p, q, k, *forced_gamma, "forced"});
      continue;
    }
    const double gs = kseq_gamma_star(p, q, k);
    cases.push_back({p, q, k, gs, "gamma*"});
    cases.push_back({p, q, k, gs + 0.1, "gamma*+0.1"});
    cases.push_back({p, q, k, static_cast<double>(k), "k"});
  }
  return cases;
}

inline TokenCaseResult check_token_case(const TokenCase& c, double tol = 1e-9) {
  TokenCaseResult r{c, 0.0, {}, false};
  try {
    const ProbVector m = kseq_output_marginal(c.p, c.q, c.k, c.gamma);
    for (std::size_t i = 0; i < m.size(); ++i) r.max_error = std::max(r.max_error, std::abs(m[i] - c.q[i]));
    r.passed = r.max_error <= tol;
  } catch (const Error& e) {
    r.failure = e.what();
    r.passed = false;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sequence level.

struct SequenceCase {
  std::size_t vocab = 3;
  std::size_t order = 1;
  std::size_t length = 2;
  std::size_t k = 2;
  SelectionMethod method = SelectionMethod::kseq();
  DraftingScheme drafting = DraftingScheme::iid();
  std::uint64_t model_seed = 11;
  double eps = 0.5;
  TokenSeq context{0};
};

struct SequenceCaseResult {
  SequenceCase c;
  double max_error = 0.0;
  double total_mass = 0.0;
  std::size_t paths = 0;
  std::string failure;
  bool passed = false;
};

inline std::string describe(const SequenceCase& c) {
  std::string s = "vocab=" + std::to_string(c.vocab) + " L=" + std::to_string(c.length) +
                  " K=" + std::to_string(c.k) + " method=" + to_string(c.method.kind);
  if (c.drafting.kind == DraftConstruction::tree) {
    s += " tree=";
    for (std::size_t i = 0; i < c.drafting.factors.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(c.drafting.factors[i]);
    }
  }
  return s;
}

/// Exact law of one draft-then-select iteration, extended to L+1 tokens with
/// the large model's own continuation, against the large model's chain rule.
inline SequenceCaseResult check_sequence_case(const SequenceCase& c, double tol = 1e-6) {
  SequenceCaseResult r{c, 0.0, 0.0, 0, {}, false};
  try {
    const ModelPair pair = make_model_pair(c.vocab, c.order, c.model_seed, c.eps);
    const std::size_t length = c.drafting.kind == DraftConstruction::tree ? c.drafting.factors.size()
                                                                          : c.length;
    const auto law = enumerate_outcomes<TokenSeq>(
        [&](ExhaustiveSource& src) {
          ExhaustiveSource draft_src = src;
          const DraftSet drafts =
              c.drafting.kind == DraftConstruction::tree
                  ? build_prefix_tree_drafts(pair.small, c.context, c.drafting.factors, draft_src)
                  : sample_iid_drafts(pair.small, c.context, c.k, length, draft_src);
          return draft_selection(c.context, drafts, pair.big, pair.small, c.method, src).new_tokens;
        },
        &r.paths);

    std::map<TokenSeq, double> extended;
    for (const auto& [emitted, pr] : law) {
      if (emitted.empty() || emitted.size() > length + 1) {
        throw Error(ErrorKind::internal, "iteration emitted an out-of-range token count");
      }
      TokenSeq ctx = c.context;
      ctx.insert(ctx.end(), emitted.begin(), emitted.end());
      for (const auto& [tail, tp] : chain_rule_law(pair.big, ctx, length + 1 - emitted.size())) {
        TokenSeq full = emitted;
        full.insert(full.end(), tail.begin(), tail.end());
        extended[full] += pr * tp;
      }
    }
    const auto oracle = chain_rule_law(pair.big, c.context, length + 1);
    for (const auto& [seq, pr] : oracle) {
      const auto it = extended.find(seq);
      r.max_error = std::max(r.max_error, std::abs(pr - (it == extended.end() ? 0.0 : it->second)));
    }
    for (const auto& [seq, pr] : extended) {
      r.total_mass += pr;
      if (!oracle.count(seq)) r.max_error = std::max(r.max_error, pr);
    }
    r.passed = r.max_error <= tol;
  } catch (const Error& e) {
    r.failure = e.what();
  }
  return r;
}

inline std::vector<SequenceCase> default_sequence_cases(std::size_t vocab = 3, std::size_t length = 2,
                                                        std::size_t k = 2) {
  std::vector<SequenceCase> cases;
  for (std::uint64_t seed : {11ULL, 29ULL}) {
    for (double eps : {0.3, 0.9}) {
      SequenceCase base;
      base.vocab = vocab;
      base.length = length;
      base.k = k;
      base.model_seed = seed;
      base.eps = eps;
      base.method = SelectionMethod::kseq();
      cases.push_back(base);
      base.method = SelectionMethod::otm_lp();
      cases.push_back(base);
      SequenceCase single = base;
      single.k = 1;
      single.method = SelectionMethod::maximal();
      cases.push_back(single);
    }
  }
  return cases;
}

}  // namespace spectr
