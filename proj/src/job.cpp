#include "pnrl/job.hpp"

#include <deque>

#include "pnrl/envs.hpp"
#include "pnrl/persistence.hpp"

namespace pnrl {

namespace fs = std::filesystem;
using nlohmann::json;

json MetricRow::to_json() const {
  json losses_json = json::array();
  for (const auto& l : losses) {
    if (!l) {
      losses_json.push_back(nullptr);
      continue;
    }
    losses_json.push_back({{"policy_loss", l->policy_loss},
                           {"value_loss", l->value_loss},
                           {"entropy", l->entropy},
                           {"grad_norm", l->grad_norm},
                           {"update_index", l->update_index}});
  }
  return {{"seq", seq},
          {"env_step", env_step},
          {"episode", episode},
          {"mean_return", mean_return},
          {"losses", losses_json}};
}

MetricRow MetricRow::from_json(const json& j) {
  MetricRow r;
  r.seq = j.at("seq").get<std::size_t>();
  r.env_step = j.at("env_step").get<std::size_t>();
  r.episode = j.at("episode").get<std::size_t>();
  r.mean_return = j.at("mean_return").get<std::vector<double>>();
  for (const auto& l : j.at("losses")) {
    if (l.is_null()) {
      r.losses.emplace_back();
      continue;
    }
    UpdateReport u;
    u.policy_loss = l.at("policy_loss").get<double>();
    u.value_loss = l.at("value_loss").get<double>();
    u.entropy = l.at("entropy").get<double>();
    u.grad_norm = l.at("grad_norm").get<double>();
    u.update_index = l.at("update_index").get<std::size_t>();
    r.losses.emplace_back(u);
  }
  return r;
}

namespace {

// Turns per-episode reports into MetricRows and keeps the final episode.
class EpisodeRecorder {
 public:
  EpisodeRecorder(std::size_t n_seats, const JobHooks& hooks) : n_(n_seats), hooks_(hooks) {}

  void operator()(const EpisodeReport& report) {
    window_.push_back(report.returns);
    if (window_.size() > kReturnWindow) window_.pop_front();
    MetricRow row;
    row.seq = ++seq_;
    row.env_step = report.env_steps;
    row.episode = report.episode;
    row.mean_return.assign(n_, 0.0);
    for (const auto& r : window_) {
      for (std::size_t i = 0; i < n_; ++i) row.mean_return[i] += r[i];
    }
    for (auto& m : row.mean_return) m /= static_cast<double>(window_.size());
    for (const Agent* a : report.agents) {
      const auto* learner = dynamic_cast<const LearningAgent*>(a);
      row.losses.push_back(learner ? learner->last_report() : std::nullopt);
    }
    if (hooks_.on_metric) hooks_.on_metric(row);
    metrics_ += row.to_json().dump() + "\n";
    last_steps_ = *report.steps;
    last_seed_ = report.seed;
  }

  const std::string& metrics() const { return metrics_; }
  const std::vector<JointStep>& last_steps() const { return last_steps_; }
  std::uint64_t last_seed() const { return last_seed_; }
  std::vector<double> window_mean() const {
    std::vector<double> m(n_, 0.0);
    if (window_.empty()) return m;
    for (const auto& r : window_) {
      for (std::size_t i = 0; i < n_; ++i) m[i] += r[i];
    }
    for (auto& v : m) v /= static_cast<double>(window_.size());
    return m;
  }

 private:
  std::size_t n_;
  const JobHooks& hooks_;
  std::deque<std::vector<double>> window_;
  std::size_t seq_ = 0;
  std::string metrics_;
  std::vector<JointStep> last_steps_;
  std::uint64_t last_seed_ = 0;
};

void write_json(const fs::path& path, const json& j, JobResult& result) {
  write_file_atomic(path, j.dump(2) + "\n");
  result.artifacts.push_back(path);
}

void write_common(const InteractionConfig& config, const JointEnvSpec& spec, const EpisodeRecorder& rec,
                  const fs::path& out_dir, JobResult& result) {
  write_file_atomic(out_dir / "metrics.jsonl", rec.metrics());
  result.artifacts.push_back(out_dir / "metrics.jsonl");
  if (config.save_trajectory && !rec.last_steps().empty()) {
    Trajectory traj{TrajectoryHeader::for_env(spec, rec.last_seed()), rec.last_steps()};
    traj.header.metadata = {{"master_seed", config.master_seed}, {"mode", to_string(config.mode)}};
    save_trajectory(traj, out_dir / "trajectory.pnrltrj");
    result.artifacts.push_back(out_dir / "trajectory.pnrltrj");
  }
}

JobResult run_session_job(const InteractionConfig& config, const fs::path& out_dir, const JobHooks& hooks) {
  auto session = build_session(config);
  const JointEnvSpec spec = session->env().spec();
  EpisodeRecorder rec(spec.n_agents, hooks);
  SessionHooks sh;
  sh.on_episode = [&rec](const EpisodeReport& r) { rec(r); };
  sh.should_stop = hooks.should_stop;
  JobResult result;
  fs::create_directories(out_dir);

  if (config.mode == Mode::AdHocEval) {
    const EvalResult eval = session->evaluate(config.eval_episodes, sh);
    const bool stopped = eval.episodes < config.eval_episodes;
    result.outcome = stopped ? JobOutcome::Cancelled : JobOutcome::Succeeded;
    write_common(config, spec, rec, out_dir, result);
    result.summary = {{"mode", to_string(config.mode)}, {"env_id", config.env_id},
                      {"master_seed", config.master_seed}, {"episodes", eval.episodes},
                      {"mean", eval.mean},             {"std", eval.std},
                      {"cancelled", stopped}};
    write_json(out_dir / "eval.json", result.summary, result);
    return result;
  }

  const SessionStats stats = session->learn(config.total_timesteps, sh);
  result.outcome = stats.cancelled ? JobOutcome::Cancelled : JobOutcome::Succeeded;

  json hashes = json::object();
  const json meta_base = {{"env_id", config.env_id}, {"master_seed", config.master_seed}};
  {
    json meta = meta_base;
    meta["seat"] = 0;
    meta["role"] = "ego";
    save_policy(session->ego().policy(), out_dir / "ego.pnrlpol", meta);
    result.artifacts.push_back(out_dir / "ego.pnrlpol");
    hashes["ego"] = session->ego().parameter_hash();
  }
  for (std::size_t seat = 1; seat < spec.n_agents; ++seat) {
    PartnerPool& pool = session->pool(seat);
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const std::string name = "seat" + std::to_string(seat) + "_partner" + std::to_string(k);
      json meta = meta_base;
      meta["seat"] = seat;
      meta["role"] = "partner";
      meta["agent"] = config.seats[seat - 1].partners[k];
      save_policy(pool.at(k).policy(), out_dir / (name + kPolicyExtension), meta);
      result.artifacts.push_back(out_dir / (name + kPolicyExtension));
      hashes[name] = pool.at(k).parameter_hash();
    }
  }
  write_common(config, spec, rec, out_dir, result);

  result.summary = {{"mode", to_string(config.mode)},
                    {"env_id", config.env_id},
                    {"master_seed", config.master_seed},
                    {"total_timesteps", config.total_timesteps},
                    {"env_steps", stats.env_steps},
                    {"episodes", stats.episodes},
                    {"cancelled", stats.cancelled},
                    {"update_counts", stats.update_counts},
                    {"final_mean_return", rec.window_mean()},
                    {"parameter_hashes", hashes}};
  write_json(out_dir / "summary.json", result.summary, result);
  return result;
}

JobResult run_cross_play_job(const InteractionConfig& config, const fs::path& out_dir) {
  config.validate();
  const auto env = make_builtin(config.env_id);
  std::vector<Policy> policies;
  for (std::size_t p = 0; p < config.population.size(); ++p) {
    policies.push_back(make_agent(config.population[p], project(env->spec(), 0),
                                  agent_stream(config.master_seed, 0, p), config.base_dir)
                           ->policy());
  }
  const CrossPlayMatrix m = cross_play(policies, config.population, *env, config.eval_episodes, config.master_seed);
  JobResult result;
  fs::create_directories(out_dir);
  result.summary = {{"mode", to_string(config.mode)},
                    {"env_id", config.env_id},
                    {"master_seed", config.master_seed},
                    {"policies", m.policy_ids},
                    {"episodes", m.episodes},
                    {"mean_returns", m.mean_returns},
                    {"std_returns", m.std_returns}};
  write_json(out_dir / "crossplay.json", result.summary, result);
  return result;
}

}  // namespace

JobResult run_job(const InteractionConfig& config, const fs::path& out_dir, const JobHooks& hooks) {
  if (config.mode == Mode::CrossPlay) return run_cross_play_job(config, out_dir);
  return run_session_job(config, out_dir, hooks);
}

}  // namespace pnrl
