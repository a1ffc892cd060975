#include "tvkd/policy_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"
#include "tvkd/random.hpp"

namespace tvkd {

TabularPolicy::TabularPolicy(StateSpace space) : space_(std::move(space)) {
  space_.check_size();
  logits_.assign(space_.nonterminal_count() * space_.vocab_size(), 0.0);
}

TabularPolicy::TabularPolicy(StateSpace space, std::vector<double> logits)
    : space_(std::move(space)), logits_(std::move(logits)) {
  space_.check_size();
  if (logits_.size() != space_.nonterminal_count() * space_.vocab_size()) {
    throw ShapeMismatch(fmt::format("logit table has {} entries, expected {}", logits_.size(),
                                    space_.nonterminal_count() * space_.vocab_size()));
  }
}

TabularPolicy TabularPolicy::gaussian(StateSpace space, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw InvalidArgument("init stddev must be nonnegative");
  TabularPolicy p(std::move(space));
  if (stddev == 0.0) return p;
  Rng rng(seed, Stream::Init);
  for (double& x : p.logits_) x = stddev * rng.normal();
  return p;
}

std::span<const double> TabularPolicy::row(StateIndex s) const {
  if (space_.is_terminal(s)) throw TerminalStateError(fmt::format("state {} is terminal", s));
  const std::size_t n = space_.vocab_size();
  return std::span<const double>(logits_).subspan(space_.row_of(s) * n, n);
}

std::span<double> TabularPolicy::row(StateIndex s) {
  if (space_.is_terminal(s)) throw TerminalStateError(fmt::format("state {} is terminal", s));
  const std::size_t n = space_.vocab_size();
  return std::span<double>(logits_).subspan(space_.row_of(s) * n, n);
}

double log_prob(const TabularPolicy& policy, StateIndex state, TokenId action) {
  const auto r = policy.row(state);
  policy.space().check_token(action);
  return r[action.value] - logsumexp(r);
}

RowGradient grad_log_prob(const TabularPolicy& policy, StateIndex state, TokenId action) {
  const auto r = policy.row(state);
  policy.space().check_token(action);
  RowGradient g{policy.space().row_of(state), softmax(r)};
  for (double& x : g.values) x = -x;
  g.values[action.value] += 1.0;
  return g;
}

void accumulate_grad_log_prob(const TabularPolicy& policy, StateIndex state, TokenId action, double scale,
                              std::span<double> grad) {
  if (grad.size() != policy.parameter_count()) throw ShapeMismatch("gradient buffer shape mismatch");
  const auto r = policy.row(state);
  policy.space().check_token(action);
  const std::size_t n = r.size();
  const double lse = logsumexp(r);
  double* g = grad.data() + policy.space().row_of(state) * n;
  for (std::size_t a = 0; a < n; ++a) g[a] -= scale * std::exp(r[a] - lse);
  g[action.value] += scale;
}

double trajectory_log_prob(const TabularPolicy& policy, const Trajectory& traj) {
  const auto states = trajectory_states(policy.space(), traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) total += log_prob(policy, states[t], traj.actions[t]);
  return total;
}

void accumulate_trajectory_grad(const TabularPolicy& policy, const Trajectory& traj, double scale,
                                std::span<double> grad) {
  const auto states = trajectory_states(policy.space(), traj);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    accumulate_grad_log_prob(policy, states[t], traj.actions[t], scale, grad);
  }
}

OptimState OptimState::make(OptimizerKind kind, double learning_rate, std::size_t parameter_count) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  OptimState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  if (kind == OptimizerKind::Adam) {
    s.m.assign(parameter_count, 0.0);
    s.v.assign(parameter_count, 0.0);
  }
  return s;
}

void apply_update(TabularPolicy& policy, std::span<const double> grad, OptimState& opt) {
  auto theta = policy.logits();
  if (grad.size() != theta.size()) {
    throw ShapeMismatch(fmt::format("gradient has {} entries, policy has {}", grad.size(), theta.size()));
  }
  ++opt.step;
  if (opt.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= opt.learning_rate * grad[i];
    return;
  }
  if (opt.m.size() != theta.size() || opt.v.size() != theta.size()) {
    throw ShapeMismatch("optimizer moments do not match the policy");
  }
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * grad[i];
    opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    const double m_hat = opt.m[i] / c1;
    const double v_hat = opt.v[i] / c2;
    theta[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
  }
}

double finite_difference_check(const PolicyLoss& loss, const PolicyGradient& gradient,
                               const TabularPolicy& policy, double epsilon, std::uint64_t seed,
                               std::size_t max_parameters) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw InvalidArgument("epsilon must lie in [1e-7, 1e-3]");
  const std::vector<double> analytic = gradient(policy);
  if (analytic.size() != policy.parameter_count()) throw ShapeMismatch("analytic gradient shape mismatch");

  std::vector<std::size_t> params(analytic.size());
  std::iota(params.begin(), params.end(), std::size_t{0});
  if (params.size() > max_parameters) {
    Rng rng(seed, Stream::Verification);
    rng.shuffle(std::span<std::size_t>(params));
    params.resize(max_parameters);
    std::sort(params.begin(), params.end());
  }

  double scale_floor = 0.0;
  for (double g : analytic) scale_floor = std::max(scale_floor, std::abs(g));
  scale_floor *= 1e-3;

  TabularPolicy probe = policy;
  double worst = 0.0;
  for (std::size_t i : params) {
    const double orig = probe.logits()[i];
    probe.logits()[i] = orig + epsilon;
    const double up = loss(probe);
    probe.logits()[i] = orig - epsilon;
    const double down = loss(probe);
    probe.logits()[i] = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double err = std::abs(analytic[i] - numeric);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), scale_floor});
    worst = std::max(worst, scale > 0.0 ? err / scale : err);
  }
  return worst;
}

namespace {

constexpr const char* kPolicyMagic = "tvkd-policy";
constexpr int kPolicyVersion = 1;

double parse_double(const std::string& token, std::size_t line) {
  double x = 0.0;
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, x);
  if (res.ec != std::errc() || res.ptr != end) throw ParseError(line, fmt::format("bad number '{}'", token));
  return x;
}

}  // namespace

void save_policy(std::ostream& out, const TabularPolicy& policy) {
  const StateSpace& space = policy.space();
  out << fmt::format("{} {}\n", kPolicyMagic, kPolicyVersion);
  out << fmt::format("vocab {} horizon {} prompts {}\n", space.vocab_size(), space.horizon(), space.num_prompts());
  std::string ids = "prompt_ids";
  for (auto id : space.prompt_ids()) ids += fmt::format(" {}", id);
  out << ids << '\n';
  const std::size_t n = space.vocab_size();
  const auto logits = policy.logits();
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    std::string line;
    for (std::size_t a = 0; a < n; ++a) {
      if (a) line += ' ';
      line += fmt::format("{}", logits[row * n + a]);
    }
    out << line << '\n';
  }
}

TabularPolicy load_policy(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of checkpoint");
    ++line_no;
    return std::istringstream(line);
  };

  {
    auto ss = next_line();
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kPolicyMagic) throw ParseError(line_no, "not a policy checkpoint");
    if (version != kPolicyVersion) throw ParseError(line_no, fmt::format("unsupported version {}", version));
  }
  std::uint32_t vocab = 0, horizon = 0;
  std::size_t prompts = 0;
  {
    auto ss = next_line();
    std::string k1, k2, k3;
    if (!(ss >> k1 >> vocab >> k2 >> horizon >> k3 >> prompts) || k1 != "vocab" || k2 != "horizon" ||
        k3 != "prompts") {
      throw ParseError(line_no, "bad shape line");
    }
  }
  std::vector<std::int64_t> ids;
  {
    auto ss = next_line();
    std::string key;
    ss >> key;
    if (key != "prompt_ids") throw ParseError(line_no, "expected prompt_ids");
    std::int64_t id = 0;
    while (ss >> id) ids.push_back(id);
    if (ids.size() != prompts) throw ParseError(line_no, "prompt id count mismatch");
  }
  StateSpace space(vocab, horizon, std::move(ids));
  space.check_size();
  std::vector<double> logits;
  logits.reserve(space.nonterminal_count() * vocab);
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    auto ss = next_line();
    std::string tok;
    std::size_t count = 0;
    while (ss >> tok) {
      logits.push_back(parse_double(tok, line_no));
      ++count;
    }
    if (count != vocab) throw ParseError(line_no, fmt::format("expected {} logits, got {}", vocab, count));
  }
  return TabularPolicy(std::move(space), std::move(logits));
}

void save_policy(const std::filesystem::path& path, const TabularPolicy& policy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  save_policy(out, policy);
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

TabularPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return load_policy(in);
}

}  // namespace tvkd
