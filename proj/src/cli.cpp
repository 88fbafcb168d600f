#include "pnrl/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>
#include <pthread.h>
#include <spdlog/spdlog.h>

#include "pnrl/config.hpp"
#include "pnrl/job.hpp"
#include "pnrl/persistence.hpp"
#include "pnrl/service.hpp"

namespace pnrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> timesteps;
  std::optional<std::size_t> episodes;
  std::string out_dir;
  std::string format = "text";
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::optional<int> port;
  std::string data_dir;
  std::optional<std::size_t> max_parallel;
  std::string ui_dir;
};

// Loads the config file and applies the subcommand's mode and flag overrides.
InteractionConfig load_config(const RunOptions& o, Mode mode) {
  std::ifstream in(o.config_path);
  if (!in) throw ConfigError("config", "cannot open '" + o.config_path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  if (!j.contains("mode")) {
    j["mode"] = to_string(mode);
  } else if (j["mode"] != to_string(mode)) {
    const std::string declared = j["mode"].is_string() ? j["mode"].get<std::string>() : j["mode"].dump();
    throw ConfigError("mode", "config declares '" + declared + "' but the subcommand runs '" +
                                  to_string(mode) + "'");
  }
  if (o.seed) j["master_seed"] = *o.seed;
  if (o.timesteps) j["total_timesteps"] = *o.timesteps;
  if (o.episodes) j["eval_episodes"] = *o.episodes;
  InteractionConfig c = InteractionConfig::from_json(j);
  const fs::path p(o.config_path);
  c.base_dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  return c;
}

fs::path out_dir_for(const RunOptions& o) {
  if (!o.out_dir.empty()) return o.out_dir;
  return fs::path("runs") / fs::path(o.config_path).stem();
}

std::string fmt_vec(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(4) << "[";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << "]";
  return os.str();
}

int run_config(const RunOptions& o, Mode mode, std::ostream& out) {
  const InteractionConfig config = load_config(o, mode);
  config.validate();
  const fs::path dir = out_dir_for(o);
  const JobResult result = run_job(config, dir);
  const json& s = result.summary;
  if (o.format == "json") {
    out << s.dump(2) << "\n";
    return kExitOk;
  }
  switch (mode) {
    case Mode::Train:
    case Mode::Adapt:
      out << to_string(mode) << " " << config.env_id << ": " << s["env_steps"] << " env steps, " << s["episodes"]
          << " episodes, mean return (last " << kReturnWindow << ") "
          << fmt_vec(s["final_mean_return"].get<std::vector<double>>()) << "\n";
      break;
    case Mode::AdHocEval:
      out << "eval " << config.env_id << ": " << s["episodes"] << " episodes, mean "
          << fmt_vec(s["mean"].get<std::vector<double>>()) << ", std " << fmt_vec(s["std"].get<std::vector<double>>())
          << "\n";
      break;
    case Mode::CrossPlay: {
      const auto ids = s["policies"].get<std::vector<std::string>>();
      out << "cross-play " << config.env_id << " (" << s["episodes"] << " episodes per cell, seat-0 return)\n";
      for (std::size_t i = 0; i < ids.size(); ++i) {
        out << "  " << ids[i] << ":";
        for (std::size_t j = 0; j < ids.size(); ++j) {
          out << " " << std::fixed << std::setprecision(3) << s["mean_returns"][i][j][0].get<double>();
        }
        out << std::defaultfloat << "\n";
      }
      break;
    }
  }
  for (const auto& a : result.artifacts) out << "  wrote " << a.string() << "\n";
  return kExitOk;
}

json inspect_json(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= kTrajectoryMagic.size() &&
      std::string_view(bytes).substr(0, kTrajectoryMagic.size()) == kTrajectoryMagic) {
    const Trajectory t = decode_trajectory(bytes);
    json obs = json::array();
    json act = json::array();
    for (const auto& s : t.header.obs_spaces) obs.push_back(to_json(s));
    for (const auto& s : t.header.act_spaces) act.push_back(to_json(s));
    json steps = json::array();
    std::vector<double> totals(t.header.n_agents, 0.0);
    for (const auto& st : t.steps) {
      json o = json::array();
      json no = json::array();
      for (const auto& x : st.obs) o.push_back(to_string(x));
      for (const auto& x : st.next_obs) no.push_back(to_string(x));
      for (std::size_t i = 0; i < totals.size(); ++i) totals[i] += st.rewards[i];
      steps.push_back({{"t", st.t}, {"obs", o}, {"actions", st.actions}, {"rewards", st.rewards},
                       {"done", st.done}, {"next_obs", no}});
    }
    return {{"kind", "trajectory"},
            {"env_id", t.header.env_id},
            {"n_agents", t.header.n_agents},
            {"horizon", t.header.horizon},
            {"seed", t.header.seed ? json(*t.header.seed) : json(nullptr)},
            {"obs_spaces", obs},
            {"act_spaces", act},
            {"metadata", t.header.metadata},
            {"records", t.steps.size()},
            {"returns", totals},
            {"steps", steps}};
  }
  const LoadedPolicy lp = decode_policy(bytes);
  const Policy& p = lp.policy;
  return {{"kind", "policy"},
          {"algo", algo_id(p.algo)},
          {"param_kind", to_string(p.params.kind)},
          {"obs_space", to_json(p.obs_space)},
          {"act_space", to_json(p.act_space)},
          {"has_critic", p.params.has_critic},
          {"param_count", p.params.values.size()},
          {"layers", p.params.layers},
          {"hyperparams", p.hp.to_json()},
          {"parameter_hash", parameter_hash(p.params)},
          {"metadata", lp.metadata}};
}

int run_inspect(const std::string& path, const std::string& format, std::ostream& out) {
  const json j = inspect_json(path);
  if (format == "json") {
    out << j.dump(2) << "\n";
    return kExitOk;
  }
  if (j["kind"] == "policy") {
    out << "policy " << path << "\n"
        << "  algo        " << j["algo"].get<std::string>() << " (" << j["param_kind"].get<std::string>()
        << (j["has_critic"].get<bool>() ? ", critic" : "") << ")\n"
        << "  obs space   " << to_string(space_from_json(j["obs_space"])) << "\n"
        << "  act space   " << to_string(space_from_json(j["act_space"])) << "\n"
        << "  parameters  " << j["param_count"] << "\n"
        << "  hash        " << j["parameter_hash"].get<std::string>() << "\n"
        << "  metadata    " << j["metadata"].dump() << "\n";
    return kExitOk;
  }
  out << "trajectory " << path << "\n"
      << "  env         " << j["env_id"].get<std::string>() << " (" << j["n_agents"] << " agents, horizon "
      << j["horizon"] << ")\n"
      << "  seed        " << j["seed"].dump() << "\n"
      << "  records     " << j["records"] << "\n"
      << "  returns     " << fmt_vec(j["returns"].get<std::vector<double>>()) << "\n";
  for (const auto& st : j["steps"]) {
    out << "  t=" << st["t"] << " obs=" << st["obs"].dump() << " actions=" << st["actions"].dump()
        << " rewards=" << st["rewards"].dump() << (st["done"].get<bool>() ? " done" : "") << "\n";
  }
  return kExitOk;
}

int run_serve(const ServeOptions& o, std::ostream& out) {
  service::ServiceOptions so = service::ServiceOptions::from_env();
  if (!o.data_dir.empty()) so.data_dir = o.data_dir;
  if (o.max_parallel) so.max_parallel = *o.max_parallel;
  int port = 8640;
  if (const char* env_port = std::getenv("PNRL_PORT"); env_port && *env_port) {
    port = std::atoi(env_port);
    if (port < 0 || port > 65535) throw ConfigError("PNRL_PORT", "must be a port number");
  }
  if (o.port) port = *o.port;
  std::optional<fs::path> ui;
  if (!o.ui_dir.empty()) ui = fs::path(o.ui_dir);

  // Signals are taken synchronously by this thread; every thread started
  // below inherits the mask.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::Service svc(so);
  service::HttpServer http(svc, ui);
  const int bound = http.start_background(o.host, port);
  out << "pnrl serve listening on http://" << o.host << ":" << bound << " (data dir " << so.data_dir.string()
      << ", max_parallel " << so.max_parallel << ")" << std::endl;

  int sig = 0;
  sigwait(&set, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  http.stop();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pnrl: multi-agent interaction experiments", "pnrl"};
  app.require_subcommand(1);

  RunOptions ro;
  auto add_run = [&](const std::string& name, const std::string& desc, bool episodes, bool timesteps) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("config", ro.config_path, "experiment config file (JSON)")->required();
    sub->add_option("--seed", ro.seed, "override master_seed");
    sub->add_option("--out-dir", ro.out_dir, "artifact directory (default runs/<config-name>)");
    if (timesteps) sub->add_option("--timesteps", ro.timesteps, "override total_timesteps");
    if (episodes) sub->add_option("--episodes", ro.episodes, "override eval_episodes");
    sub->add_option("--format", ro.format, "output format")->check(CLI::IsMember({"text", "json"}));
    return sub;
  };
  CLI::App* train = add_run("train", "train an ego agent against partner pools", false, true);
  CLI::App* adapt = add_run("adapt", "adapt a pretrained ego to frozen partners", false, true);
  CLI::App* eval = add_run("eval", "evaluate frozen agents (ad hoc play)", true, false);
  CLI::App* crossplay = add_run("crossplay", "pairwise cross-play matrix over a population", true, false);

  ServeOptions so;
  CLI::App* serve = app.add_subcommand("serve", "run the experiment service");
  serve->add_option("--host", so.host, "bind address");
  serve->add_option("--port", so.port, "port (default PNRL_PORT or 8640; 0 picks a free port)");
  serve->add_option("--data-dir", so.data_dir, "store root (default PNRL_DATA_DIR or ./pnrl-data)");
  serve->add_option("--max-parallel", so.max_parallel, "concurrent jobs (default PNRL_MAX_PARALLEL or 4)")
      ->check(CLI::PositiveNumber);
  serve->add_option("--ui-dir", so.ui_dir, "directory of static UI assets served at /");

  std::string inspect_path;
  std::string inspect_format = "text";
  CLI::App* inspect = app.add_subcommand("inspect", "describe a policy or trajectory file");
  inspect->add_option("file", inspect_path, ".pnrlpol or .pnrltrj file")->required();
  inspect->add_option("--format", inspect_format, "output format")->check(CLI::IsMember({"text", "json"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kExitConfig;
  }

  try {
    if (train->parsed()) return run_config(ro, Mode::Train, out);
    if (adapt->parsed()) return run_config(ro, Mode::Adapt, out);
    if (eval->parsed()) return run_config(ro, Mode::AdHocEval, out);
    if (crossplay->parsed()) return run_config(ro, Mode::CrossPlay, out);
    if (serve->parsed()) return run_serve(so, out);
    if (inspect->parsed()) return run_inspect(inspect_path, inspect_format, out);
  } catch (const ConfigError& e) {
    err << "error: invalid configuration\n";
    for (const auto& d : e.diagnostics()) {
      err << "  " << (d.field.empty() ? "<config>" : d.field) << ": " << d.message << "\n";
    }
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace pnrl::cli
