#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "spectr/rng.hpp"
#include "spectr/toy_lm.hpp"

namespace spectr {

enum class DraftConstruction { iid, tree };

/// Candidate continuations stored as a prefix tree. Node 0 is the context;
/// every other node is one drafted token. i.i.d. drafts are K disjoint
/// chains; prefix-tree drafts branch by k_i at depth i. The draft-model
/// conditional that produced a node's children is cached on the node.
class DraftSet {
 public:
  struct Node {
    TokenId token = 0;
    std::size_t parent = 0;
    std::size_t depth = 0;
    std::vector<std::size_t> children;
  };

  DraftSet(TokenSeq context, std::size_t length, DraftConstruction construction,
           std::vector<std::size_t> factors)
      : context_(std::move(context)), length_(length), construction_(construction),
        factors_(std::move(factors)) {
    nodes_.push_back(Node{});
    conditionals_.emplace_back();
  }

  const TokenSeq& context() const noexcept { return context_; }
  std::size_t length() const noexcept { return length_; }
  DraftConstruction construction() const noexcept { return construction_; }
  /// (K) for i.i.d. drafts, (k_1..k_L) for prefix trees.
  const std::vector<std::size_t>& factors() const noexcept { return factors_; }

  std::size_t node_count() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  static constexpr std::size_t root() noexcept { return 0; }

  /// Draft-model conditional given context + path(node); present for every
  /// node above the leaves.
  const ProbVector& conditional(std::size_t i) const {
    if (!conditionals_.at(i)) throw Error(ErrorKind::structural, "no cached conditional at leaf");
    return *conditionals_[i];
  }
  bool has_conditional(std::size_t i) const { return conditionals_.at(i).has_value(); }

  /// Tokens on the path from the root to `i`, excluding the context.
  TokenSeq path(std::size_t i) const {
    TokenSeq out(nodes_.at(i).depth);
    for (std::size_t n = i; n != root(); n = nodes_[n].parent) out[nodes_[n].depth - 1] = nodes_[n].token;
    return out;
  }

  TokenSeq prefix(std::size_t i) const {
    TokenSeq out = context_;
    const TokenSeq p = path(i);
    out.insert(out.end(), p.begin(), p.end());
    return out;
  }

  /// Full-length draft sequences (the leaves), in construction order.
  std::vector<TokenSeq> sequences() const {
    std::vector<TokenSeq> out;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      if (nodes_[i].depth == length_) out.push_back(path(i));
    }
    return out;
  }

  std::size_t add_child(std::size_t parent, TokenId token) {
    const std::size_t id = nodes_.size();
    nodes_.push_back(Node{token, parent, nodes_.at(parent).depth + 1, {}});
    nodes_[parent].children.push_back(id);
    conditionals_.emplace_back();
    return id;
  }

  void set_conditional(std::size_t i, ProbVector dist) { conditionals_.at(i) = std::move(dist); }

 private:
  TokenSeq context_;
  std::size_t length_;
  DraftConstruction construction_;
  std::vector<std::size_t> factors_;
  std::vector<Node> nodes_;
  std::vector<std::optional<ProbVector>> conditionals_;
};

/// K independent rollouts of length L from the draft model, drawn one after
/// another from `rng` (so K = 1 is plain autoregressive sampling).
template <RandomSource R>
DraftSet sample_iid_drafts(const ToyLm& small, const TokenSeq& context, std::size_t k,
                           std::size_t length, R& rng) {
  if (k == 0 || length == 0) throw Error(ErrorKind::domain, "K and L must be at least 1");
  DraftSet set(context, length, DraftConstruction::iid, {k});
  set.set_conditional(DraftSet::root(), small.next_dist(context));
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t node = DraftSet::root();
    TokenSeq prefix = context;
    for (std::size_t d = 0; d < length; ++d) {
      if (!set.has_conditional(node)) set.set_conditional(node, small.next_dist(prefix));
      const TokenId t = static_cast<TokenId>(rng.draw(set.conditional(node)));
      node = set.add_child(node, t);
      prefix.push_back(t);
    }
  }
  return set;
}

/// Breadth-first prefix tree: every depth-i node gets k_{i+1} children whose
/// tokens are i.i.d. from the draft conditional at that node. Each node draws
/// from its own substream keyed by its child-index path.
template <RandomSource R>
DraftSet build_prefix_tree_drafts(const ToyLm& small, const TokenSeq& context,
                                  const std::vector<std::size_t>& factors, R& rng) {
  if (factors.empty()) throw Error(ErrorKind::domain, "prefix tree needs at least one depth");
  for (std::size_t f : factors) {
    if (f == 0) throw Error(ErrorKind::domain, "every branching factor must be >= 1");
  }
  DraftSet set(context, factors.size(), DraftConstruction::tree, factors);
  std::vector<R> streams{rng};
  std::vector<std::size_t> level{DraftSet::root()};
  for (std::size_t depth = 0; depth < factors.size(); ++depth) {
    std::vector<std::size_t> next;
    for (std::size_t node : level) {
      set.set_conditional(node, small.next_dist(set.prefix(node)));
      for (std::size_t c = 0; c < factors[depth]; ++c) {
        R child_stream = streams[node].fork(c);
        const TokenId t = static_cast<TokenId>(child_stream.draw(set.conditional(node)));
        const std::size_t id = set.add_child(node, t);
        streams.push_back(std::move(child_stream));
        next.push_back(id);
      }
    }
    level = std::move(next);
  }
  return set;
}

}  // namespace spectr
