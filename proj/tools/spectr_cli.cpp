// Command-line front end: acceptance probabilities, closed-form sweeps,
// exactness verification and decoding benchmarks.
//
// Exit status: 0 success, 1 verification failure, 2 usage error,
// 3 size cap exceeded.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "spectr/spectr.hpp"
#include "spectr/trace_json.hpp"

namespace {

using namespace spectr;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCap = 3;

struct Output {
  std::string format = "csv";
  std::string path;

  void validate() const {
    if (format != "csv" && format != "json") {
      throw Error(ErrorKind::validation, "--format must be csv or json");
    }
  }

  void write(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::validation, "cannot open output file " + path);
    out << text;
  }
};

void add_output_flags(CLI::App* cmd, Output& out) {
  cmd->add_option("--format", out.format, "csv or json")->capture_default_str();
  cmd->add_option("--out", out.path, "write to this file instead of stdout");
}

// Config echo: one comment line listing every setting in a fixed order.
class Echo {
 public:
  explicit Echo(std::string command) : line_("# spectr " + std::move(command)) {}
  template <class T>
  Echo& operator()(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    line_ += " " + key + "=" + os.str();
    if constexpr (std::is_integral_v<T>) {
      json_[key] = value;
    } else {
      json_[key] = os.str();
    }
    return *this;
  }
  Echo& operator()(const std::string& key, double value) {
    line_ += " " + key + "=" + format_real(value);
    json_[key] = value;
    return *this;
  }
  const std::string& line() const { return line_; }
  const json& as_json() const { return json_; }

 private:
  std::string line_;
  json json_ = json::object();
};

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
  return s;
}

template <class T>
std::string join_ints(const std::vector<T>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_reals(text)) {
    if (v < 1.0 || v != std::floor(v)) throw Error(ErrorKind::validation, "expected positive integers in '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// coupling

struct CouplingArgs {
  std::string p, q, method = "all", plan_out;
  std::size_t k = 1;
  std::size_t cap = kDefaultTupleCap;
  Output out;
};

std::string alpha_cell(const std::optional<double>& a) { return a ? format_real(*a) : "skipped"; }

int run_coupling(const CouplingArgs& a) {
  a.out.validate();
  const ProbVector p = parse_prob_vector(a.p);
  const ProbVector q = parse_prob_vector(a.q);
  require_same_vocab(p, q);
  if (a.k == 0) throw Error(ErrorKind::validation, "--k must be at least 1");
  const std::vector<std::string> known{"maximal", "kseq", "otm", "upper", "all"};
  if (std::find(known.begin(), known.end(), a.method) == known.end()) {
    throw Error(ErrorKind::validation, "--method must be one of maximal, kseq, otm, upper, all");
  }
  const bool all = a.method == "all";

  struct Row {
    std::string method;
    std::size_t k;
    std::optional<double> alpha;
    std::string detail;
  };
  std::vector<Row> rows;
  auto guarded = [&](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (!all || e.kind() != ErrorKind::size_limit) throw;
      std::cerr << name << " skipped: " << e.what() << "\n";
      rows.push_back({name, a.k, std::nullopt, "cap=" + std::to_string(a.cap)});
    }
  };

  if (all || a.method == "maximal") {
    const AcceptanceReport r = report_maximal(p, q);
    rows.push_back({"maximal", 1, r.alpha, ""});
  }
  if (all || a.method == "kseq") {
    const AcceptanceReport r = report_kseq(p, q, a.k);
    rows.push_back({"kseq", a.k, r.alpha, "gamma=" + format_real(*r.gamma)});
  }
  if (all || a.method == "otm") {
    guarded("otm", [&] {
      const OtmSolution sol = otm_lp_solve(p, q, a.k, a.cap);
      rows.push_back({"otm", a.k, sol.alpha, ""});
      if (!a.plan_out.empty()) {
        std::ofstream f(a.plan_out, std::ios::binary);
        if (!f) throw Error(ErrorKind::validation, "cannot open " + a.plan_out);
        write_plan_csv(f, sol.plan);
      }
    });
  }
  if (all || a.method == "upper") {
    guarded("upper", [&] {
      const AcceptanceReport r = report_upper(p, q, a.k, a.cap);
      rows.push_back({"upper", a.k, r.alpha, "subset=" + join_ints(*r.subset, '-')});
    });
  }

  int status = kExitOk;
  if (all) {
    std::optional<double> kseq, otm, upper;
    for (const auto& r : rows) {
      if (r.method == "kseq") kseq = r.alpha;
      if (r.method == "otm") otm = r.alpha;
      if (r.method == "upper") upper = r.alpha;
    }
    if (kseq && otm && upper) {
      const bool ok = *kseq <= *otm + 1e-7 && *otm <= *upper + 1e-7;
      std::cerr << "ordering kseq <= otm <= upper: " << (ok ? "ok" : "VIOLATED") << "\n";
      if (!ok) status = kExitVerifyFailed;
    }
  }

  Echo echo("coupling");
  echo("p", a.p)("q", a.q)("k", a.k)("method", a.method)("cap", a.cap);
  std::ostringstream os;
  if (a.out.format == "csv") {
    os << echo.line() << "\n" << "method,k,alpha,detail\n";
    for (const auto& r : rows) os << r.method << ',' << r.k << ',' << alpha_cell(r.alpha) << ',' << r.detail << '\n';
  } else {
    json j{{"config", echo.as_json()}, {"reports", json::array()}};
    for (const auto& r : rows) {
      j["reports"].push_back({{"method", r.method},
                              {"k", r.k},
                              {"alpha", r.alpha ? json(*r.alpha) : json("skipped")},
                              {"detail", r.detail}});
    }
    os << j.dump(2) << "\n";
  }
  a.out.write(os.str());
  return status;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string family = "bernoulli";
  double p_head = 0.25;
  std::string b_list = "0.1,0.25,0.75,1";
  std::size_t d = 120;
  std::string r_list = "1,2,4,8";
  std::size_t k_max = 10;
  bool with_lp = false;
  bool no_kseq = false;
  std::size_t cap = kDefaultTupleCap;
  Output out;
};

int run_sweep(const SweepArgs& a) {
  a.out.validate();
  if (a.k_max == 0) throw Error(ErrorKind::validation, "--k-max must be at least 1");
  SweepMethods methods{true, !a.no_kseq, a.with_lp};
  Echo echo("sweep");
  echo("family", a.family);
  std::vector<SweepRow> rows;
  if (a.family == "bernoulli") {
    const auto heads = parse_reals(a.b_list);
    echo("p", a.p_head)("b", join_reals(heads));
    rows = sweep_bernoulli(a.p_head, heads, a.k_max, methods, a.cap);
  } else if (a.family == "uniform") {
    const auto ratios = parse_reals(a.r_list);
    echo("d", a.d)("r", join_reals(ratios));
    rows = sweep_uniform(a.d, ratios, a.k_max, methods, a.cap);
  } else {
    throw Error(ErrorKind::validation, "--family must be bernoulli or uniform");
  }
  echo("k_max", a.k_max)("kseq", methods.kseq ? "yes" : "no")("with_lp", a.with_lp ? "yes" : "no")("cap", a.cap);

  std::ostringstream os;
  if (a.out.format == "csv") {
    os << echo.line() << "\n" << "family,param,k,method,alpha\n";
    for (const auto& r : rows) {
      os << r.family << ',' << r.param << ',' << r.k << ',' << r.method << ',' << alpha_cell(r.alpha) << '\n';
    }
  } else {
    json j{{"config", echo.as_json()}, {"rows", json::array()}};
    for (const auto& r : rows) {
      j["rows"].push_back({{"family", r.family},
                           {"param", r.param},
                           {"k", r.k},
                           {"method", r.method},
                           {"alpha", r.alpha ? json(*r.alpha) : json("skipped")}});
    }
    os << j.dump(2) << "\n";
  }
  a.out.write(os.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string scope = "token";
  std::uint64_t seed = 1;
  std::size_t cases = 100;
  std::size_t k_min = 1;
  std::size_t k_max = 8;
  std::optional<double> gamma;
  std::size_t vocab = 3;
  std::size_t length = 2;
  std::size_t drafts = 2;
  Output out;
};

int run_verify(const VerifyArgs& a) {
  a.out.validate();
  Echo echo("verify");
  echo("scope", a.scope)("seed", a.seed);
  struct Line {
    std::string name;
    double error;
    bool passed;
    std::string failure;
  };
  std::vector<Line> lines;
  double tol = 0.0;

  if (a.scope == "token") {
    if (a.k_min == 0 || a.k_max < a.k_min) throw Error(ErrorKind::validation, "need 1 <= --k-min <= --k-max");
    tol = 1e-9;
    echo("cases", a.cases)("k_min", a.k_min)("k_max", a.k_max)("gamma", a.gamma ? format_real(*a.gamma) : "auto");
    for (const auto& c : default_token_cases(a.seed, a.cases, a.k_min, a.k_max, a.gamma)) {
      const TokenCaseResult r = check_token_case(c, tol);
      const std::string name = "p=" + to_string(c.p) + " q=" + to_string(c.q) + " k=" + std::to_string(c.k) +
                               " gamma=" + format_real(c.gamma) + " (" + c.gamma_label + ")";
      lines.push_back({name, r.max_error, r.passed, r.failure});
    }
  } else if (a.scope == "sequence") {
    if (a.vocab > 4 || a.length > 3 || a.drafts > 3) {
      throw Error(ErrorKind::size_limit, "sequence enumeration is capped at vocab <= 4, L <= 3, K <= 3");
    }
    tol = 1e-6;
    echo("vocab", a.vocab)("L", a.length)("K", a.drafts);
    for (const auto& c : default_sequence_cases(a.vocab, a.length, a.drafts)) {
      const SequenceCaseResult r = check_sequence_case(c, tol);
      const std::string name = describe(c) + " seed=" + std::to_string(c.model_seed) + " eps=" + format_real(c.eps);
      lines.push_back({name, r.max_error, r.passed, r.failure});
    }
  } else {
    throw Error(ErrorKind::validation, "--scope must be token or sequence");
  }

  const Line* worst = nullptr;
  std::size_t failed = 0;
  for (const auto& l : lines) {
    if (!l.passed) ++failed;
    if (!worst || (!l.passed && worst->passed) ||
        (l.passed == worst->passed && l.error > worst->error)) {
      worst = &l;
    }
  }

  std::ostringstream os;
  if (a.out.format == "csv") {
    os << echo.line() << " tol=" << format_real(tol) << "\n" << "case,max_error,status,diagnosis\n";
    for (const auto& l : lines) {
      os << '"' << l.name << "\"," << format_real(l.error) << ',' << (l.passed ? "pass" : "fail") << ",\""
         << l.failure << "\"\n";
    }
  } else {
    json j{{"config", echo.as_json()}, {"tolerance", tol}, {"cases", json::array()}};
    for (const auto& l : lines) {
      j["cases"].push_back({{"case", l.name}, {"max_error", l.error}, {"passed", l.passed}, {"diagnosis", l.failure}});
    }
    j["failed"] = failed;
    os << j.dump(2) << "\n";
  }
  a.out.write(os.str());

  if (failed > 0) {
    std::cerr << failed << " of " << lines.size() << " cases failed; worst: " << worst->name;
    if (!worst->failure.empty()) std::cerr << " -- " << worst->failure;
    std::cerr << "\n";
    return kExitVerifyFailed;
  }
  std::cerr << "all " << lines.size() << " cases passed\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeArgs {
  std::size_t vocab = 16;
  std::size_t order = 1;
  std::uint64_t model_seed = 7;
  double eps = 0.3;
  bool allow_zeros = false;
  std::string model_config;
  std::string k_list = "1,2,4,8";
  std::string l_list = "4";
  std::string method = "kseq";
  std::string gamma_policy = "recompute";
  std::string drafting = "iid";
  std::size_t prompts = 200;
  std::size_t prompt_length = 4;
  std::size_t tokens = 64;
  std::uint64_t seed = 1;
  double big_cost = 1.0;
  double small_cost = 0.0;
  double overhead = 0.0;
  std::string trace_dir;
  Output out;
};

void apply_model_config(DecodeArgs& a) {
  if (a.model_config.empty()) return;
  std::ifstream in(a.model_config);
  if (!in) throw Error(ErrorKind::validation, "cannot open model config " + a.model_config);
  try {
    const json j = json::parse(in);
    if (j.contains("vocab_size")) a.vocab = j["vocab_size"].get<std::size_t>();
    if (j.contains("order")) a.order = j["order"].get<std::size_t>();
    if (j.contains("seed")) a.model_seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eps")) a.eps = j["eps"].get<double>();
    if (j.contains("allow-zeros")) a.allow_zeros = j["allow-zeros"].get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::validation, std::string("bad model config: ") + e.what());
  }
}

int run_decode(DecodeArgs a) {
  a.out.validate();
  apply_model_config(a);
  DecodeBenchConfig cfg;
  cfg.model = ModelPairConfig{{a.vocab, a.order, a.model_seed, a.allow_zeros}, a.eps};
  cfg.ks = parse_sizes(a.k_list);
  cfg.lengths = parse_sizes(a.l_list);
  cfg.method.kind = parse_selection_kind(a.method);
  if (a.gamma_policy == "recompute") {
    cfg.method.gamma_policy = GammaPolicy::recompute;
  } else if (a.gamma_policy == "initial-k") {
    cfg.method.gamma_policy = GammaPolicy::initial_k;
  } else {
    throw Error(ErrorKind::validation, "--gamma-policy must be recompute or initial-k");
  }
  if (a.drafting == "iid") {
    cfg.drafting = DraftingScheme::iid();
  } else if (a.drafting.rfind("tree:", 0) == 0) {
    cfg.drafting = DraftingScheme::tree(parse_sizes(a.drafting.substr(5)));
  } else {
    throw Error(ErrorKind::validation, "--drafting must be iid or tree:k1,k2,...");
  }
  cfg.prompts = a.prompts;
  cfg.prompt_length = a.prompt_length;
  cfg.total_tokens = a.tokens;
  cfg.seed = a.seed;
  cfg.cost = CostModel{a.big_cost, a.small_cost, a.overhead};
  cfg.cost.validate();
  if (cfg.method.kind == SelectionMethod::Kind::maximal) {
    for (std::size_t k : cfg.ks) {
      if (k != 1) throw Error(ErrorKind::validation, "--method maximal requires --K 1");
    }
  }

  TraceSink sink;
  if (!a.trace_dir.empty()) {
    std::filesystem::create_directories(a.trace_dir);
    sink = [&](const BenchSummaryRow& row, std::size_t j, const DecodeTrace& t) {
      const auto file = std::filesystem::path(a.trace_dir) /
                        (row.algorithm + "_K" + std::to_string(row.k) + "_L" + std::to_string(row.length) +
                         "_p" + std::to_string(j) + ".json");
      std::ofstream f(file, std::ios::binary);
      f << trace_to_json(t).dump(2) << "\n";
    };
  }
  const auto rows = run_benchmark(cfg, sink);

  Echo echo("decode");
  echo("vocab", a.vocab)("order", a.order)("model_seed", a.model_seed)("eps", a.eps)(
      "allow_zeros", a.allow_zeros ? "yes" : "no")("K", join_ints(cfg.ks))("L", join_ints(cfg.lengths))(
      "method", a.method)("gamma_policy", a.gamma_policy)("drafting", a.drafting)("prompts", a.prompts)(
      "prompt_length", a.prompt_length)("tokens", a.tokens)("seed", a.seed)("big_cost", a.big_cost)(
      "small_cost", a.small_cost)("overhead", a.overhead);

  std::ostringstream os;
  if (a.out.format == "csv") {
    os << echo.line() << "\n"
       << "algorithm,K,L,mean_block_efficiency,stderr_block_efficiency,simulated_speedup\n";
    for (const auto& r : rows) {
      os << r.algorithm << ',' << r.k << ',' << r.length << ',' << format_real(r.mean_block_efficiency) << ','
         << format_real(r.stderr_block_efficiency) << ',' << format_real(r.mean_speedup) << '\n';
    }
  } else {
    json j{{"config", echo.as_json()}, {"summary", json::array()}};
    for (const auto& r : rows) {
      j["summary"].push_back({{"algorithm", r.algorithm},
                              {"K", r.k},
                              {"L", r.length},
                              {"mean_block_efficiency", r.mean_block_efficiency},
                              {"stderr_block_efficiency", r.stderr_block_efficiency},
                              {"simulated_speedup", r.mean_speedup}});
    }
    os << j.dump(2) << "\n";
  }
  a.out.write(os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speculative decoding with multiple drafts: coupling analysis and toy benchmarks"};
  app.require_subcommand(1);

  CouplingArgs coupling;
  auto* c = app.add_subcommand("coupling", "acceptance probability of draft-selection methods for one (p, q, k)");
  c->add_option("--p", coupling.p, "draft distribution, e.g. 0.25,0.75")->required();
  c->add_option("--q", coupling.q, "target distribution")->required();
  c->add_option("--k", coupling.k, "number of i.i.d. drafts")->capture_default_str();
  c->add_option("--method", coupling.method, "maximal|kseq|otm|upper|all")->capture_default_str();
  c->add_option("--cap", coupling.cap, "max |vocab|^k for the LP and the bound")->capture_default_str();
  c->add_option("--plan-out", coupling.plan_out, "write the optimal transport plan as CSV");
  add_output_flags(c, coupling.out);

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "acceptance versus k for Bernoulli or uniform pairs");
  s->add_option("--family", sweep.family, "bernoulli|uniform")->capture_default_str();
  s->add_option("--p", sweep.p_head, "bernoulli: head probability of p")->capture_default_str();
  s->add_option("--b", sweep.b_list, "bernoulli: head probabilities of q")->capture_default_str();
  s->add_option("--d", sweep.d, "uniform: support size of p")->capture_default_str();
  s->add_option("--r", sweep.r_list, "uniform: ratios r with q = U(d/r)")->capture_default_str();
  s->add_option("--k-max", sweep.k_max, "largest k")->capture_default_str();
  s->add_flag("--with-lp", sweep.with_lp, "add exact LP rows where the tuple cap allows");
  s->add_flag("--no-kseq", sweep.no_kseq, "omit K-SEQ rows");
  s->add_option("--cap", sweep.cap, "max |vocab|^k for LP rows")->capture_default_str();
  add_output_flags(s, sweep.out);

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "exactness checks for token- and sequence-level selection");
  v->add_option("--scope", verify.scope, "token|sequence")->capture_default_str();
  v->add_option("--seed", verify.seed, "case generator seed")->capture_default_str();
  v->add_option("--cases", verify.cases, "token scope: number of random (p, q, k)")->capture_default_str();
  v->add_option("--k-min", verify.k_min, "token scope: smallest k")->capture_default_str();
  v->add_option("--k-max", verify.k_max, "token scope: largest k")->capture_default_str();
  v->add_option("--gamma", verify.gamma, "token scope: force this gamma instead of {gamma*, gamma*+0.1, k}");
  v->add_option("--vocab", verify.vocab, "sequence scope: vocabulary size")->capture_default_str();
  v->add_option("--L", verify.length, "sequence scope: draft length")->capture_default_str();
  v->add_option("--K", verify.drafts, "sequence scope: number of drafts")->capture_default_str();
  add_output_flags(v, verify.out);

  DecodeArgs decode;
  auto* d = app.add_subcommand("decode", "block efficiency of baseline, speculative and multi-draft decoding");
  d->add_option("--vocab", decode.vocab, "toy model vocabulary size")->capture_default_str();
  d->add_option("--order", decode.order, "toy model context order")->capture_default_str();
  d->add_option("--model-seed", decode.model_seed, "toy model seed")->capture_default_str();
  d->add_option("--eps", decode.eps, "draft model divergence in [0,1]")->capture_default_str();
  d->add_flag("--allow-zeros", decode.allow_zeros, "zero a seeded subset of every model row");
  d->add_option("--model-config", decode.model_config,
                "JSON with vocab_size, order, seed, eps, allow-zeros (overrides flags)");
  d->add_option("--K", decode.k_list, "draft counts, e.g. 1,2,4,8")->capture_default_str();
  d->add_option("--L", decode.l_list, "draft lengths, e.g. 4,8")->capture_default_str();
  d->add_option("--method", decode.method, "kseq|otm|maximal")->capture_default_str();
  d->add_option("--gamma-policy", decode.gamma_policy, "recompute|initial-k")->capture_default_str();
  d->add_option("--drafting", decode.drafting, "iid or tree:k1,k2,...")->capture_default_str();
  d->add_option("--prompts,--trials", decode.prompts, "prompts; prompt j uses seed + j")->capture_default_str();
  d->add_option("--prompt-length", decode.prompt_length, "tokens per prompt")->capture_default_str();
  d->add_option("--tokens", decode.tokens, "tokens to generate per prompt")->capture_default_str();
  d->add_option("--seed", decode.seed, "base seed")->capture_default_str();
  d->add_option("--big-cost", decode.big_cost, "simulated cost of a large-model call")->capture_default_str();
  d->add_option("--small-cost", decode.small_cost, "simulated cost of a draft-model step")->capture_default_str();
  d->add_option("--overhead", decode.overhead, "simulated overhead per iteration")->capture_default_str();
  d->add_option("--trace-dir", decode.trace_dir, "write one JSON trace per run here");
  add_output_flags(d, decode.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c) return run_coupling(coupling);
    if (*s) return run_sweep(sweep);
    if (*v) return run_verify(verify);
    if (*d) return run_decode(decode);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::size_limit ? kExitCap : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
