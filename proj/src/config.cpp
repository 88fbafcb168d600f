#include "pnrl/config.hpp"

#include <algorithm>
#include <fstream>

#include "pnrl/envs.hpp"
#include "pnrl/persistence.hpp"

namespace pnrl {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- agent ids

AgentSpec AgentSpec::parse(const std::string& id) {
  AgentSpec spec;
  const auto colon = id.find(':');
  const std::string head = id.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : id.substr(colon + 1);
  if (head == "static") {
    if (rest.empty()) throw std::invalid_argument("'static:' needs a policy file");
    if (rest == "uniform") {
      spec.kind = Kind::StaticUniform;
    } else if (rest.rfind("const:", 0) == 0) {
      spec.kind = Kind::StaticConst;
      const std::string a = rest.substr(6);
      if (a.empty() || a.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("'static:const:' needs a non-negative action index, got '" + a + "'");
      }
      spec.constant_action = std::stoll(a);
    } else {
      spec.kind = Kind::StaticFile;
      spec.path = rest;
    }
    return spec;
  }
  if (head != "learn") throw std::invalid_argument("agent id must start with 'static:' or 'learn:', got '" + id + "'");
  const auto colon2 = rest.find(':');
  const std::string algo = rest.substr(0, colon2);
  if (!is_algo_id(algo)) throw std::invalid_argument("unknown algorithm '" + algo + "' (expected q, reinforce, a2c)");
  spec.kind = Kind::Learn;
  spec.algo = algo_from_id(algo);
  spec.hp = Hyperparams::defaults(spec.algo);
  if (colon2 == std::string::npos) return spec;
  const std::string overrides = rest.substr(colon2 + 1);
  std::size_t start = 0;
  while (start <= overrides.size()) {
    const auto comma = overrides.find(',', start);
    const std::string item = overrides.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("override '" + item + "' is not key=value");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "updates") {
        if (value != "0" && value != "1") throw std::invalid_argument("updates must be 0 or 1");
        spec.updates = value == "1";
      } else if (key == "init") {
        if (value.empty()) throw std::invalid_argument("init needs a policy file");
        spec.path = value;
      } else {
        spec.hp.set(key, value);
        spec.overrides.emplace_back(key, value);
      }
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  spec.hp.check();
  return spec;
}

RngStream agent_stream(std::uint64_t master_seed, std::size_t seat, std::size_t k) {
  return RngStream(master_seed).split(streams::kAgents).split(seat).split(k);
}

fs::path resolve_path(const InteractionConfig& config, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || config.base_dir.empty()) return p;
  return config.base_dir / p;
}

namespace {

Policy load_fitting(const fs::path& path, const ProjectedView& seat) {
  if (!fs::exists(path)) throw IoError("policy file '" + path.string() + "' does not exist");
  Policy p = load_policy(path).policy;
  check_fits(p, seat);
  return p;
}

}  // namespace

std::unique_ptr<Agent> make_agent(const std::string& id, const ProjectedView& seat, const RngStream& rng,
                                  const fs::path& base_dir) {
  const AgentSpec spec = AgentSpec::parse(id);
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  const std::size_t s = seat.agent_index;
  switch (spec.kind) {
    case AgentSpec::Kind::StaticFile:
      return std::make_unique<StaticPolicyAgent>(s, load_fitting(resolve(spec.path), seat), rng.split(0));
    case AgentSpec::Kind::StaticConst:
      return std::make_unique<StaticPolicyAgent>(
          s, constant_policy(seat.obs_space, seat.act_space, spec.constant_action), rng.split(0));
    case AgentSpec::Kind::StaticUniform:
      return std::make_unique<StaticPolicyAgent>(s, uniform_policy(seat.obs_space, seat.act_space), rng.split(0));
    case AgentSpec::Kind::Learn:
      break;
  }
  Policy policy;
  if (spec.has_init()) {
    policy = load_fitting(resolve(spec.path), seat);
    if (policy.algo != spec.algo) {
      throw std::invalid_argument("init policy was trained with '" + algo_id(policy.algo) + "', not '" +
                                  algo_id(spec.algo) + "'");
    }
    for (const auto& [k, v] : spec.overrides) policy.hp.set(k, v);
    policy.hp.check();
  } else {
    RngStream init_rng = rng.split(1);
    policy = init_policy(spec.algo, spec.hp, seat.obs_space, seat.act_space, init_rng);
  }
  auto agent = std::make_unique<LearningAgent>(s, std::move(policy), rng.split(0));
  agent->set_updates_enabled(spec.updates);
  return agent;
}

// ---------------------------------------------------------------- json

json InteractionConfig::to_json() const {
  json seats_json = json::array();
  for (const auto& seat : seats) seats_json.push_back({{"sampling", to_string(seat.sampling)}, {"partners", seat.partners}});
  json j = {{"mode", to_string(mode)},
            {"env_id", env_id},
            {"total_timesteps", total_timesteps},
            {"master_seed", master_seed},
            {"eval_episodes", eval_episodes},
            {"save_trajectory", save_trajectory}};
  if (mode == Mode::CrossPlay) {
    j["population"] = population;
  } else {
    j["ego"] = ego;
    j["seats"] = seats_json;
  }
  return j;
}

InteractionConfig InteractionConfig::from_json(const json& j) {
  std::vector<Diagnostic> diags;
  InteractionConfig c;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");

  static const std::vector<std::string> known = {"mode",          "env_id",       "ego",        "seats",
                                                 "total_timesteps", "master_seed", "eval_episodes", "population",
                                                 "save_trajectory"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) diags.push_back({key, "unknown field"});
  }

  auto get_string = [&](const char* field, std::string& out, bool required) {
    if (!j.contains(field)) {
      if (required) diags.push_back({field, "missing"});
      return;
    }
    if (!j[field].is_string()) {
      diags.push_back({field, "must be a string"});
      return;
    }
    out = j[field].get<std::string>();
  };
  auto get_count = [&](const char* field, auto& out) {
    if (!j.contains(field)) return;
    if (!j[field].is_number_integer() || j[field].get<std::int64_t>() < 0) {
      diags.push_back({field, "must be a non-negative integer"});
      return;
    }
    out = j[field].get<std::remove_reference_t<decltype(out)>>();
  };

  std::string mode;
  get_string("mode", mode, true);
  if (!mode.empty()) {
    try {
      c.mode = mode_from_string(mode);
    } catch (const std::invalid_argument& e) {
      diags.push_back({"mode", e.what()});
    }
  }
  get_string("env_id", c.env_id, true);
  get_string("ego", c.ego, false);
  get_count("total_timesteps", c.total_timesteps);
  get_count("master_seed", c.master_seed);
  get_count("eval_episodes", c.eval_episodes);
  if (j.contains("save_trajectory")) {
    if (j["save_trajectory"].is_boolean()) c.save_trajectory = j["save_trajectory"].get<bool>();
    else diags.push_back({"save_trajectory", "must be a boolean"});
  }

  if (j.contains("seats")) {
    if (!j["seats"].is_array()) {
      diags.push_back({"seats", "must be an array"});
    } else {
      for (std::size_t k = 0; k < j["seats"].size(); ++k) {
        const json& s = j["seats"][k];
        const std::string field = "seats[" + std::to_string(k) + "]";
        SeatConfig seat;
        if (!s.is_object()) {
          diags.push_back({field, "must be an object"});
          continue;
        }
        if (s.contains("sampling")) {
          try {
            seat.sampling = sampling_from_string(s["sampling"].get<std::string>());
          } catch (const std::exception& e) {
            diags.push_back({field + ".sampling", e.what()});
          }
        }
        if (!s.contains("partners") || !s["partners"].is_array()) {
          diags.push_back({field + ".partners", "must be an array of agent ids"});
        } else {
          for (std::size_t p = 0; p < s["partners"].size(); ++p) {
            if (!s["partners"][p].is_string()) {
              diags.push_back({field + ".partners[" + std::to_string(p) + "]", "must be a string"});
            } else {
              seat.partners.push_back(s["partners"][p].get<std::string>());
            }
          }
        }
        c.seats.push_back(std::move(seat));
      }
    }
  }
  if (j.contains("population")) {
    if (!j["population"].is_array()) {
      diags.push_back({"population", "must be an array of agent ids"});
    } else {
      for (std::size_t p = 0; p < j["population"].size(); ++p) {
        if (!j["population"][p].is_string()) {
          diags.push_back({"population[" + std::to_string(p) + "]", "must be a string"});
        } else {
          c.population.push_back(j["population"][p].get<std::string>());
        }
      }
    }
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
  return c;
}

InteractionConfig InteractionConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  InteractionConfig c = from_json(j);
  c.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return c;
}

// ---------------------------------------------------------------- validation

void InteractionConfig::validate() const {
  std::vector<Diagnostic> diags;
  if (!builtin_registry().contains(env_id)) {
    std::string known;
    for (const auto& id : builtin_env_ids()) known += (known.empty() ? "" : ", ") + id;
    diags.push_back({"env_id", "unknown environment '" + env_id + "' (known: " + known + ")"});
    throw ConfigError(std::move(diags));
  }
  const JointEnvSpec spec = builtin_spec(env_id);

  // Parses and instantiates one agent; returns the spec on success.
  auto check_agent = [&](const std::string& field, const std::string& id,
                         std::size_t seat) -> std::optional<AgentSpec> {
    try {
      AgentSpec parsed = AgentSpec::parse(id);
      make_agent(id, project(spec, seat), agent_stream(master_seed, seat, 0), base_dir);
      return parsed;
    } catch (const Error& e) {
      diags.push_back({field, e.what()});
    } catch (const std::invalid_argument& e) {
      diags.push_back({field, e.what()});
    }
    return std::nullopt;
  };

  if (mode == Mode::CrossPlay) {
    if (spec.n_agents != 2) diags.push_back({"env_id", "cross-play needs a two-player environment"});
    if (population.size() < 2) diags.push_back({"population", "cross-play needs at least two agents"});
    for (std::size_t p = 0; p < population.size(); ++p) {
      const std::string field = "population[" + std::to_string(p) + "]";
      const auto parsed = check_agent(field, population[p], 0);
      if (parsed && spec.n_agents == 2) check_agent(field, population[p], 1);
      if (parsed && !parsed->frozen()) diags.push_back({field, "evaluation requires frozen agents"});
    }
    if (eval_episodes < 1) diags.push_back({"eval_episodes", "must be >= 1"});
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return;
  }

  std::vector<std::pair<std::string, AgentSpec>> partners;
  std::optional<AgentSpec> ego_spec;
  if (ego.empty()) {
    diags.push_back({"ego", "missing"});
  } else {
    ego_spec = check_agent("ego", ego, 0);
  }
  if (seats.size() != spec.n_agents - 1) {
    diags.push_back({"seats", "env '" + env_id + "' has " + std::to_string(spec.n_agents - 1) +
                                  " partner seat(s), config lists " + std::to_string(seats.size())});
  }
  for (std::size_t k = 0; k < seats.size() && k + 1 < spec.n_agents; ++k) {
    const std::string field = "seats[" + std::to_string(k) + "].partners";
    if (seats[k].partners.empty()) diags.push_back({field, "needs at least one agent"});
    for (std::size_t p = 0; p < seats[k].partners.size(); ++p) {
      const std::string pf = field + "[" + std::to_string(p) + "]";
      if (auto s = check_agent(pf, seats[k].partners[p], k + 1)) partners.emplace_back(pf, *s);
    }
  }

  switch (mode) {
    case Mode::Train:
    case Mode::Adapt:
      if (total_timesteps < 1) diags.push_back({"total_timesteps", "must be >= 1"});
      if (ego_spec && ego_spec->frozen()) diags.push_back({"ego", "must be a learning agent with updates enabled"});
      if (mode == Mode::Adapt) {
        if (ego_spec && ego_spec->kind == AgentSpec::Kind::Learn && !ego_spec->has_init()) {
          diags.push_back({"ego", "adapt mode needs the ego policy to adapt (learn:<algo>:init=<policy-file>)"});
        }
        for (const auto& [field, s] : partners) {
          if (!s.frozen()) diags.push_back({field, "adapt mode requires frozen partners (static: or updates=0)"});
        }
      }
      break;
    case Mode::AdHocEval:
      if (eval_episodes < 1) diags.push_back({"eval_episodes", "must be >= 1"});
      if (ego_spec && !ego_spec->frozen()) diags.push_back({"ego", "evaluation requires a frozen agent"});
      for (const auto& [field, s] : partners) {
        if (!s.frozen()) diags.push_back({field, "evaluation requires frozen agents"});
      }
      break;
    case Mode::CrossPlay:
      break;
  }
  if (!diags.empty()) throw ConfigError(std::move(diags));
}

std::unique_ptr<Session> build_session(const InteractionConfig& config) {
  config.validate();
  if (config.mode == Mode::CrossPlay) throw ConfigError("mode", "cross_play does not use a session");
  auto env = make_builtin(config.env_id);
  const JointEnvSpec spec = env->spec();
  auto ego = make_agent(config.ego, project(spec, 0), agent_stream(config.master_seed, 0, 0), config.base_dir);
  auto session = std::make_unique<Session>(std::move(env), std::move(ego), config.master_seed, config.mode);
  for (std::size_t k = 0; k < config.seats.size(); ++k) {
    const std::size_t seat = k + 1;
    session->set_sampling(seat, config.seats[k].sampling);
    for (std::size_t p = 0; p < config.seats[k].partners.size(); ++p) {
      session->add_partner_agent(seat, make_agent(config.seats[k].partners[p], project(spec, seat),
                                                  agent_stream(config.master_seed, seat, p), config.base_dir));
    }
  }
  return session;
}

}  // namespace pnrl
