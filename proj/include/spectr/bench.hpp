#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spectr/coupling.hpp"
#include "spectr/decode.hpp"
#include "spectr/otm.hpp"

namespace spectr {

// ---------------------------------------------------------------------------
// Acceptance probabilities for one (p, q, k).

inline AcceptanceReport report_maximal(const ProbVector& p, const ProbVector& q) {
  return {AcceptanceMethod::maximal, overlap(p, q), 1, std::nullopt, std::nullopt};
}

inline AcceptanceReport report_kseq(const ProbVector& p, const ProbVector& q, std::size_t k) {
  AcceptanceReport r{AcceptanceMethod::kseq, 0.0, k, std::nullopt, std::nullopt};
  if (tv_distance(p, q) >= 1.0 - kNegativeTolerance) {
    // Disjoint supports: no draft can ever be accepted.
    r.gamma = 1.0;
    return r;
  }
  const double gamma = kseq_gamma_star(p, q, k);
  r.gamma = gamma;
  r.alpha = kseq_acceptance(p, q, k, gamma);
  return r;
}

inline AcceptanceReport report_otm(const ProbVector& p, const ProbVector& q, std::size_t k,
                                   std::size_t cap = kDefaultTupleCap) {
  return {AcceptanceMethod::otm_lp, otm_lp_solve(p, q, k, cap).alpha, k, std::nullopt, std::nullopt};
}

inline AcceptanceReport report_upper(const ProbVector& p, const ProbVector& q, std::size_t k,
                                     std::size_t cap = kDefaultTupleCap) {
  const UpperBound ub = alpha_upper_bound(p, q, k, cap);
  return {AcceptanceMethod::upper_bound, ub.alpha_bar, k, std::nullopt, ub.witness};
}

// ---------------------------------------------------------------------------
// Sweeps over the Bernoulli and uniform families.

struct SweepRow {
  std::string family;
  std::string param;
  std::size_t k = 1;
  std::string method;
  std::optional<double> alpha;  // empty when the row was skipped
};

struct SweepMethods {
  bool closed_form = true;
  bool kseq = true;
  bool otm = false;
};

/// p = Ber(p_head), q = Ber(b) for every b, k = 1..k_max.
inline std::vector<SweepRow> sweep_bernoulli(double p_head, const std::vector<double>& heads,
                                             std::size_t k_max, SweepMethods methods,
                                             std::size_t cap = kDefaultTupleCap) {
  std::vector<SweepRow> rows;
  const ProbVector p = ProbVector::bernoulli(p_head);
  for (double b : heads) {
    const ProbVector q = ProbVector::bernoulli(b);
    const std::string param = format_real(b);
    for (std::size_t k = 1; k <= k_max; ++k) {
      if (methods.closed_form) {
        rows.push_back({"bernoulli", param, k, "closed_form", alpha_bernoulli_closed_form(p_head, b, k)});
      }
      if (methods.kseq) rows.push_back({"bernoulli", param, k, "kseq", report_kseq(p, q, k).alpha});
      if (methods.otm) {
        std::optional<double> a;
        try {
          a = report_otm(p, q, k, cap).alpha;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::size_limit) throw;
        }
        rows.push_back({"bernoulli", param, k, "otm", a});
      }
    }
  }
  return rows;
}

/// p = U(d), q = U(d/r) for every r, k = 1..k_max.
inline std::vector<SweepRow> sweep_uniform(std::size_t d, const std::vector<double>& ratios,
                                           std::size_t k_max, SweepMethods methods,
                                           std::size_t cap = kDefaultTupleCap) {
  std::vector<SweepRow> rows;
  const ProbVector p = ProbVector::uniform(d);
  for (double r : ratios) {
    // Validates that d / r is a positive integer.
    (void)alpha_uniform_closed_form(d, r, 1);
    const auto support = static_cast<std::size_t>(std::llround(static_cast<double>(d) / r));
    const ProbVector q = ProbVector::uniform_prefix(d, support);
    const std::string param = format_real(r);
    for (std::size_t k = 1; k <= k_max; ++k) {
      if (methods.closed_form) {
        rows.push_back({"uniform", param, k, "closed_form", alpha_uniform_closed_form(d, r, k)});
      }
      if (methods.kseq) rows.push_back({"uniform", param, k, "kseq", report_kseq(p, q, k).alpha});
      if (methods.otm) {
        std::optional<double> a;
        try {
          a = report_otm(p, q, k, cap).alpha;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::size_limit) throw;
        }
        rows.push_back({"uniform", param, k, "otm", a});
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Decoding benchmark.

struct DecodeBenchConfig {
  ModelPairConfig model;
  std::vector<std::size_t> ks{1, 2, 4, 8};
  std::vector<std::size_t> lengths{4};
  SelectionMethod method = SelectionMethod::kseq();
  DraftingScheme drafting = DraftingScheme::iid();
  std::size_t prompts = 200;
  std::size_t prompt_length = 4;
  std::size_t total_tokens = 64;
  std::uint64_t seed = 1;
  CostModel cost{};
  bool include_baseline = true;
};

struct BenchSummaryRow {
  std::string algorithm;
  std::size_t k = 0;
  std::size_t length = 0;
  double mean_block_efficiency = 0.0;
  double stderr_block_efficiency = 0.0;
  double mean_speedup = 0.0;
};

/// Prompt j is drawn uniformly from the vocabulary with seed + j; decoding
/// for prompt j uses a separate substream of the same seed, shared by every
/// configuration (common random numbers across rows).
inline TokenSeq bench_prompt(std::uint64_t seed, std::size_t index, std::size_t vocab, std::size_t length) {
  RngStream rng = RngStream(seed + index).fork(0);
  const ProbVector uni = ProbVector::uniform(vocab);
  TokenSeq prompt(length);
  for (auto& t : prompt) t = rng.draw(uni);
  return prompt;
}

inline RngStream bench_decode_rng(std::uint64_t seed, std::size_t index) {
  return RngStream(seed + index).fork(1);
}

using TraceSink = std::function<void(const BenchSummaryRow&, std::size_t prompt_index, const DecodeTrace&)>;

inline BenchSummaryRow summarize(const std::string& algorithm, std::size_t k, std::size_t length,
                                 const std::vector<double>& be, const std::vector<double>& speedup) {
  BenchSummaryRow row{algorithm, k, length};
  const double n = static_cast<double>(be.size());
  double mean = 0.0, sp = 0.0;
  for (double v : be) mean += v;
  for (double v : speedup) sp += v;
  mean /= n;
  double var = 0.0;
  for (double v : be) var += (v - mean) * (v - mean);
  row.mean_block_efficiency = mean;
  row.stderr_block_efficiency = be.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  row.mean_speedup = sp / n;
  return row;
}

inline std::vector<BenchSummaryRow> run_benchmark(const DecodeBenchConfig& cfg, const TraceSink& sink = {}) {
  if (cfg.prompts == 0) throw Error(ErrorKind::domain, "benchmark needs at least one prompt");
  const ModelPair pair = make_model_pair(cfg.model);
  const std::size_t vocab = cfg.model.base.vocab_size;
  std::vector<BenchSummaryRow> rows;

  auto run_rows = [&](const std::string& label, std::size_t k, std::size_t length,
                      const std::function<DecodeTrace(const TokenSeq&, RngStream&)>& decode) {
    std::vector<double> be, sp;
    std::vector<DecodeTrace> traces;
    for (std::size_t j = 0; j < cfg.prompts; ++j) {
      const TokenSeq prompt = bench_prompt(cfg.seed, j, vocab, cfg.prompt_length);
      RngStream rng = bench_decode_rng(cfg.seed, j);
      traces.push_back(decode(prompt, rng));
      be.push_back(block_efficiency(traces.back()));
      sp.push_back(simulated_speedup(traces.back(), cfg.cost));
    }
    rows.push_back(summarize(label, k, length, be, sp));
    if (sink) {
      for (std::size_t j = 0; j < traces.size(); ++j) sink(rows.back(), j, traces[j]);
    }
  };

  if (cfg.include_baseline) {
    run_rows("baseline", 0, 0, [&](const TokenSeq& prompt, RngStream& rng) {
      return baseline_decode(pair.big, prompt, cfg.total_tokens, rng, cfg.cost);
    });
  }

  if (cfg.drafting.kind == DraftConstruction::tree) {
    DecodeConfig dc{1, cfg.drafting.factors.size(), cfg.method, cfg.drafting, cfg.cost};
    std::size_t leaves = 1;
    for (std::size_t f : cfg.drafting.factors) leaves *= f;
    run_rows(algorithm_label(dc) + "_tree", leaves, dc.length, [&](const TokenSeq& prompt, RngStream& rng) {
      return spectr_decode(pair.big, pair.small, prompt, cfg.total_tokens, dc, rng);
    });
    return rows;
  }

  for (std::size_t length : cfg.lengths) {
    for (std::size_t k : cfg.ks) {
      DecodeConfig dc{k, length, cfg.method, cfg.drafting, cfg.cost};
      // A single draft is classic speculative decoding.
      if (k == 1) dc.method = SelectionMethod::maximal();
      run_rows(algorithm_label(dc), k, length, [&](const TokenSeq& prompt, RngStream& rng) {
        return spectr_decode(pair.big, pair.small, prompt, cfg.total_tokens, dc, rng);
      });
    }
  }
  return rows;
}

}  // namespace spectr
