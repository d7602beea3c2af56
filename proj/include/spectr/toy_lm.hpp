#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <vector>

#include "spectr/prob.hpp"
#include "spectr/rng.hpp"

namespace spectr {

using TokenSeq = std::vector<TokenId>;

struct ToyLmConfig {
  std::size_t vocab_size = 16;
  std::size_t order = 1;
  std::uint64_t seed = 0;
  bool allow_zeros = false;
};

namespace detail {

inline std::uint64_t context_key(std::span<const TokenId> ctx) {
  std::uint64_t h = splitmix64(ctx.size());
  for (TokenId t : ctx) h = splitmix64(h ^ (static_cast<std::uint64_t>(t) + 0x100000001b3ULL));
  return h;
}

inline constexpr double kRowSharpness = 4.0;
inline constexpr double kZeroFraction = 0.3;

/// exp(sharpness * u) normalized, with u uniform; optionally zeroes a seeded
/// subset of entries (never all of them).
inline ProbVector generated_row(const ToyLmConfig& cfg, std::span<const TokenId> ctx) {
  RngStream rng = RngStream(cfg.seed).fork(context_key(ctx));
  std::vector<double> w(cfg.vocab_size);
  for (double& v : w) v = std::exp(kRowSharpness * rng.uniform());
  if (cfg.allow_zeros) {
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (w[i] > w[argmax]) argmax = i;
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool drop = rng.bernoulli(kZeroFraction);
      if (drop && i != argmax) w[i] = 0.0;
    }
  }
  return ProbVector::normalized(std::move(w));
}

}  // namespace detail

/// Table-backed autoregressive model: the next-token distribution depends on
/// the last `order` tokens of the context. Rows are produced on first use by a
/// deterministic generator and memoized, so the table never has to be
/// enumerated and repeated queries agree bit for bit.
class ToyLm {
 public:
  using RowFn = std::function<ProbVector(std::span<const TokenId>)>;

  explicit ToyLm(const ToyLmConfig& cfg)
      : ToyLm(cfg.vocab_size, cfg.order, [cfg](std::span<const TokenId> ctx) {
          return detail::generated_row(cfg, ctx);
        }) {
    if (cfg.vocab_size < 2) throw Error(ErrorKind::domain, "toy model vocabulary must be >= 2");
  }

  /// Model whose rows come from an arbitrary function of the truncated context.
  ToyLm(std::size_t vocab_size, std::size_t order, RowFn rows)
      : vocab_(vocab_size), order_(order), rows_(std::move(rows)), memo_(std::make_shared<Memo>()) {
    if (vocab_ == 0) throw Error(ErrorKind::domain, "vocabulary must be nonempty");
  }

  std::size_t vocab_size() const noexcept { return vocab_; }
  std::size_t order() const noexcept { return order_; }

  /// Row for the last min(order, |context|) tokens.
  ProbVector next_dist(std::span<const TokenId> context) const {
    for (TokenId t : context) {
      if (t >= vocab_) {
        throw Error(ErrorKind::domain, "context token " + std::to_string(t) +
                                           " outside vocabulary of " + std::to_string(vocab_));
      }
    }
    const std::size_t n = std::min(order_, context.size());
    TokenSeq key(context.end() - static_cast<std::ptrdiff_t>(n), context.end());
    {
      std::shared_lock lock(memo_->mutex);
      if (auto it = memo_->rows.find(key); it != memo_->rows.end()) return it->second;
    }
    ProbVector row = rows_(key);
    if (row.size() != vocab_) {
      throw Error(ErrorKind::dimension, "row generator returned the wrong vocabulary size");
    }
    std::unique_lock lock(memo_->mutex);
    return memo_->rows.emplace(std::move(key), std::move(row)).first->second;
  }

 private:
  struct Memo {
    std::shared_mutex mutex;
    std::map<TokenSeq, ProbVector> rows;
  };

  std::size_t vocab_;
  std::size_t order_;
  RowFn rows_;
  std::shared_ptr<Memo> memo_;
};

/// Every row is the same point mass on `token`.
inline ToyLm point_mass_model(std::size_t vocab, TokenId token, std::size_t order = 0) {
  return ToyLm(vocab, order, [vocab, token](std::span<const TokenId>) {
    return ProbVector::point_mass(vocab, token);
  });
}

struct ModelPairConfig {
  ToyLmConfig base;
  double eps = 0.3;
};

/// Large and draft models; each draft row is (1-eps) * big + eps * perturbation.
struct ModelPair {
  ToyLm big;
  ToyLm small;
  double divergence_eps = 0.0;
};

inline constexpr std::uint64_t kPerturbationSalt = 0x5bd1e9955bd1e995ULL;

inline ModelPair make_model_pair(const ModelPairConfig& cfg) {
  if (cfg.base.vocab_size < 2) throw Error(ErrorKind::domain, "vocab_size must be >= 2");
  if (!(cfg.eps >= 0.0 && cfg.eps <= 1.0)) throw Error(ErrorKind::domain, "eps must lie in [0,1]");
  ToyLm big(cfg.base);
  ToyLmConfig pert_cfg = cfg.base;
  pert_cfg.seed = cfg.base.seed ^ kPerturbationSalt;
  ToyLm pert(pert_cfg);
  const double eps = cfg.eps;
  ToyLm small(cfg.base.vocab_size, cfg.base.order,
              [big, pert, eps](std::span<const TokenId> ctx) -> ProbVector {
                if (eps == 0.0) return big.next_dist(ctx);
                if (eps == 1.0) return pert.next_dist(ctx);
                const ProbVector b = big.next_dist(ctx);
                const ProbVector e = pert.next_dist(ctx);
                std::vector<double> w(b.size());
                for (std::size_t i = 0; i < w.size(); ++i) w[i] = (1.0 - eps) * b[i] + eps * e[i];
                return ProbVector::normalized(std::move(w));
              });
  return {std::move(big), std::move(small), eps};
}

inline ModelPair make_model_pair(std::size_t vocab_size, std::size_t order, std::uint64_t seed,
                                 double eps, bool allow_zeros = false) {
  return make_model_pair(ModelPairConfig{{vocab_size, order, seed, allow_zeros}, eps});
}

/// Fixed, seed-independent set of contexts used to summarize model divergence.
inline std::vector<TokenSeq> probe_contexts(std::size_t vocab, std::size_t order,
                                            std::size_t count = 32) {
  RngStream rng(0x70726f6265ULL);
  const ProbVector uni = ProbVector::uniform(vocab);
  std::vector<TokenSeq> out(count);
  for (auto& ctx : out) {
    ctx.resize(order);
    for (auto& t : ctx) t = rng.draw(uni);
  }
  return out;
}

/// Mean total-variation distance between big and small over the probe set.
inline double probe_mean_tv(const ModelPair& pair, std::size_t count = 32) {
  const auto probes = probe_contexts(pair.big.vocab_size(), pair.big.order(), count);
  double s = 0.0;
  for (const auto& ctx : probes) s += tv_distance(pair.big.next_dist(ctx), pair.small.next_dist(ctx));
  return s / static_cast<double>(probes.size());
}

/// Simulated time units. A large-model call costs the same whether it scores
/// one position or a whole batch of draft prefixes in parallel.
struct CostModel {
  double big_call_cost = 1.0;
  double small_call_cost = 0.0;
  double overhead_per_iter = 0.0;

  void validate() const {
    if (big_call_cost < 0.0 || small_call_cost < 0.0 || overhead_per_iter < 0.0) {
      throw Error(ErrorKind::domain, "cost model entries must be nonnegative");
    }
  }
};

}  // namespace spectr
