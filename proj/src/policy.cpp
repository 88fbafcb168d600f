#include "pnrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pnrl/bytes.hpp"
#include "pnrl/digest.hpp"
#include "pnrl/errors.hpp"

namespace pnrl {

std::string algo_id(Algo algo) {
  switch (algo) {
    case Algo::TabularQ: return "q";
    case Algo::Reinforce: return "reinforce";
    case Algo::ActorCritic: return "a2c";
  }
  return "unknown";
}

bool is_algo_id(const std::string& id) { return id == "q" || id == "reinforce" || id == "a2c" || id == "ppo"; }

Algo algo_from_id(const std::string& id) {
  if (id == "q") return Algo::TabularQ;
  if (id == "reinforce") return Algo::Reinforce;
  if (id == "a2c" || id == "ppo") return Algo::ActorCritic;
  throw std::invalid_argument("unknown algorithm '" + id + "'");
}

std::string to_string(ParamKind kind) { return kind == ParamKind::Table ? "table" : "mlp"; }

ParamKind param_kind_from_string(const std::string& s) {
  if (s == "table") return ParamKind::Table;
  if (s == "mlp") return ParamKind::Mlp;
  throw std::invalid_argument("net must be 'table' or 'mlp', got '" + s + "'");
}

// ---------------------------------------------------------------- hyperparams

Hyperparams Hyperparams::defaults(Algo algo) {
  Hyperparams hp;
  if (algo == Algo::TabularQ) hp.batch = 1;
  return hp;
}

void Hyperparams::check() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw std::invalid_argument(field + " " + what);
  };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma", "must be in (0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda", "must be in [0, 1]");
  if (!(lr > 0.0) || !std::isfinite(lr)) fail("lr", "must be a positive finite number");
  if (!(entropy_coef >= 0.0) || !std::isfinite(entropy_coef)) fail("entropy_coef", "must be >= 0");
  if (!(value_coef >= 0.0) || !std::isfinite(value_coef)) fail("value_coef", "must be >= 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon", "must be in [0, 1]");
  if (batch < 1) fail("batch", "must be >= 1");
  if (hidden < 1) fail("hidden", "must be >= 1");
}

void Hyperparams::set(const std::string& key, const std::string& value) {
  auto as_double = [&]() {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != value.size() || value.empty()) throw std::invalid_argument(key + " expects a number, got '" + value + "'");
    return v;
  };
  auto as_count = [&]() {
    if (value.empty() || !std::all_of(value.begin(), value.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw std::invalid_argument(key + " expects a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(std::stoull(value));
  };
  if (key == "gamma") gamma = as_double();
  else if (key == "lambda") lambda = as_double();
  else if (key == "lr") lr = as_double();
  else if (key == "entropy_coef") entropy_coef = as_double();
  else if (key == "value_coef") value_coef = as_double();
  else if (key == "epsilon") epsilon = as_double();
  else if (key == "batch") batch = as_count();
  else if (key == "hidden") hidden = as_count();
  else if (key == "net") net = param_kind_from_string(value);
  else throw std::invalid_argument("unknown hyperparameter '" + key + "'");
}

nlohmann::json Hyperparams::to_json() const {
  nlohmann::json j = {{"gamma", gamma},         {"lambda", lambda},         {"lr", lr},
                      {"entropy_coef", entropy_coef}, {"value_coef", value_coef}, {"epsilon", epsilon},
                      {"batch", batch},         {"hidden", hidden}};
  j["net"] = net ? nlohmann::json(to_string(*net)) : nlohmann::json(nullptr);
  return j;
}

Hyperparams Hyperparams::from_json(const nlohmann::json& j) {
  Hyperparams hp;
  hp.gamma = j.at("gamma").get<double>();
  hp.lambda = j.at("lambda").get<double>();
  hp.lr = j.at("lr").get<double>();
  hp.entropy_coef = j.at("entropy_coef").get<double>();
  hp.value_coef = j.at("value_coef").get<double>();
  hp.epsilon = j.at("epsilon").get<double>();
  hp.batch = j.at("batch").get<std::size_t>();
  hp.hidden = j.at("hidden").get<std::size_t>();
  if (j.contains("net") && !j.at("net").is_null()) hp.net = param_kind_from_string(j.at("net").get<std::string>());
  return hp;
}

// ---------------------------------------------------------------- params

std::size_t PolicyParams::expected_size() const {
  if (kind == ParamKind::Table) return n_states * n_actions + (has_critic ? n_states : 0);
  return mlp::param_count(layers);
}

namespace mlp {

std::size_t param_count(std::span<const std::size_t> layers) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) total += (layers[l] + 1) * layers[l + 1];
  return total;
}

void init(std::span<const std::size_t> layers, std::span<double> params, RngStream& rng) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const std::size_t fan_in = layers[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::size_t count = (fan_in + 1) * layers[l + 1];
    for (std::size_t k = 0; k < count; ++k) params[off + k] = (2.0 * rng.uniform() - 1.0) * bound;
    off += count;
  }
}

std::vector<double> forward(std::span<const std::size_t> layers, std::span<const double> params,
                            std::span<const double> input, Cache* cache) {
  std::vector<double> a(input.begin(), input.end());
  if (cache) cache->activations.assign(1, a);
  std::size_t off = 0;
  const std::size_t n_layers = layers.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = layers[l];
    const std::size_t out = layers[l + 1];
    const double* w = params.data() + off;
    const double* b = w + in * out;
    std::vector<double> z(out);
    for (std::size_t r = 0; r < out; ++r) {
      double s = b[r];
      const double* row = w + r * in;
      for (std::size_t c = 0; c < in; ++c) s += row[c] * a[c];
      z[r] = (l + 1 < n_layers) ? std::tanh(s) : s;
    }
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
    off += (in + 1) * out;
  }
  return a;
}

void backward(std::span<const std::size_t> layers, std::span<const double> params, const Cache& cache,
              std::span<const double> grad_output, std::span<double> grad) {
  const std::size_t n_layers = layers.size() - 1;
  std::vector<std::size_t> offsets(n_layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = off;
    off += (layers[l] + 1) * layers[l + 1];
  }
  std::vector<double> g(grad_output.begin(), grad_output.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t in = layers[l];
    const std::size_t out = layers[l + 1];
    const double* w = params.data() + offsets[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + in * out;
    const auto& a_prev = cache.activations[l];
    std::vector<double> g_prev(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double gr = g[r];
      gb[r] += gr;
      const double* row = w + r * in;
      double* grow = gw + r * in;
      for (std::size_t c = 0; c < in; ++c) {
        grow[c] += gr * a_prev[c];
        g_prev[c] += row[c] * gr;
      }
    }
    if (l > 0) {
      for (std::size_t c = 0; c < in; ++c) g_prev[c] *= 1.0 - a_prev[c] * a_prev[c];
    }
    g = std::move(g_prev);
  }
}

}  // namespace mlp

// ---------------------------------------------------------------- policy

Policy init_policy(Algo algo, const Hyperparams& hp, const SpaceSpec& obs_space, const SpaceSpec& act_space,
                   RngStream& rng) {
  hp.check();
  if (act_space.kind != SpaceKind::Discrete) throw std::invalid_argument("action space must be Discrete");
  Policy p;
  p.algo = algo;
  p.hp = hp;
  p.obs_space = obs_space;
  p.act_space = act_space;
  const ParamKind kind = hp.net.value_or(obs_space.kind == SpaceKind::Discrete ? ParamKind::Table : ParamKind::Mlp);
  if (kind == ParamKind::Table && obs_space.kind != SpaceKind::Discrete) {
    throw std::invalid_argument("Box observations require net=mlp");
  }
  if (algo == Algo::TabularQ && kind != ParamKind::Table) {
    throw std::invalid_argument("q learner is tabular; net=mlp is not supported");
  }
  PolicyParams& pp = p.params;
  pp.kind = kind;
  pp.has_critic = algo == Algo::ActorCritic;
  const auto n_actions = static_cast<std::size_t>(act_space.n);
  if (kind == ParamKind::Table) {
    pp.n_states = static_cast<std::size_t>(obs_space.n);
    pp.n_actions = n_actions;
    pp.values.assign(pp.expected_size(), 0.0);
  } else {
    pp.n_actions = n_actions;
    pp.layers = {obs_space.feature_dim(), hp.hidden, hp.hidden, n_actions + (pp.has_critic ? 1 : 0)};
    pp.values.assign(pp.expected_size(), 0.0);
    mlp::init(pp.layers, pp.values, rng);
  }
  return p;
}

Policy constant_policy(const SpaceSpec& obs_space, const SpaceSpec& act_space, Action action) {
  if (obs_space.kind != SpaceKind::Discrete) throw std::invalid_argument("constant policy needs Discrete observations");
  if (action < 0 || action >= act_space.n) throw std::invalid_argument("constant action outside action space");
  Hyperparams hp = Hyperparams::defaults(Algo::TabularQ);
  hp.epsilon = 0.0;
  RngStream unused;
  Policy p = init_policy(Algo::TabularQ, hp, obs_space, act_space, unused);
  for (std::size_t s = 0; s < p.params.n_states; ++s) {
    p.params.values[s * p.params.n_actions + static_cast<std::size_t>(action)] = 1.0;
  }
  return p;
}

Policy uniform_policy(const SpaceSpec& obs_space, const SpaceSpec& act_space) {
  Hyperparams hp = Hyperparams::defaults(Algo::Reinforce);
  hp.net = obs_space.kind == SpaceKind::Discrete ? ParamKind::Table : ParamKind::Mlp;
  RngStream unused;
  Policy p = init_policy(Algo::Reinforce, hp, obs_space, act_space, unused);
  std::fill(p.params.values.begin(), p.params.values.end(), 0.0);
  return p;
}

HeadOutput evaluate_heads(const Policy& policy, const Observation& obs) {
  if (!validate(policy.obs_space, obs)) {
    throw InvalidObservation(to_string(obs) + " not in " + to_string(policy.obs_space));
  }
  const PolicyParams& pp = policy.params;
  HeadOutput out;
  if (pp.kind == ParamKind::Table) {
    const auto s = static_cast<std::size_t>(std::get<std::int64_t>(obs));
    const double* row = pp.values.data() + s * pp.n_actions;
    out.logits.assign(row, row + pp.n_actions);
    if (pp.has_critic) out.value = pp.values[pp.n_states * pp.n_actions + s];
    return out;
  }
  const auto x = features(policy.obs_space, obs);
  auto y = mlp::forward(pp.layers, pp.values, x);
  if (pp.has_critic) out.value = y[pp.n_actions];
  y.resize(pp.n_actions);
  out.logits = std::move(y);
  return out;
}

std::vector<double> action_distribution(const Policy& policy, const Observation& obs) {
  const HeadOutput head = evaluate_heads(policy, obs);
  const std::size_t n = head.logits.size();
  std::vector<double> p(n);
  if (policy.algo == Algo::TabularQ) {
    const auto greedy = static_cast<std::size_t>(
        std::max_element(head.logits.begin(), head.logits.end()) - head.logits.begin());
    const double eps = policy.hp.epsilon;
    for (std::size_t a = 0; a < n; ++a) p[a] = eps / static_cast<double>(n);
    p[greedy] += 1.0 - eps;
    return p;
  }
  const double mx = *std::max_element(head.logits.begin(), head.logits.end());
  double z = 0.0;
  for (std::size_t a = 0; a < n; ++a) z += (p[a] = std::exp(head.logits[a] - mx));
  for (auto& v : p) v /= z;
  return p;
}

double value_estimate(const Policy& policy, const Observation& obs) {
  if (!policy.params.has_critic) throw NotSupported("learner '" + algo_id(policy.algo) + "' has no critic");
  return evaluate_heads(policy, obs).value;
}

std::string serialize_params(const PolicyParams& params) {
  std::string out;
  bytes::put_u8(out, static_cast<std::uint8_t>(params.kind));
  bytes::put_u64(out, params.n_states);
  bytes::put_u64(out, params.n_actions);
  bytes::put_u64(out, params.layers.size());
  for (auto l : params.layers) bytes::put_u64(out, l);
  bytes::put_u8(out, params.has_critic ? 1 : 0);
  bytes::put_u64(out, params.values.size());
  for (double v : params.values) bytes::put_f64(out, v);
  return out;
}

std::string parameter_hash(const PolicyParams& params) { return sha256_hex(serialize_params(params)); }

}  // namespace pnrl
