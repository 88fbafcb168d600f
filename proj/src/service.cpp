#include "pnrl/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>
#include <sqlite3.h>

#include "pnrl/envs.hpp"

namespace pnrl::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string random_token() {
  std::random_device rd;
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (int i = 0; i < 4; ++i) os << std::setw(8) << rd();
  return os.str();
}

constexpr const char* kJobsNs = "jobs";
constexpr const char* kSessionsNs = "sessions";
constexpr const char* kMetaNs = "meta";

}  // namespace

std::string to_string(JobState s) {
  switch (s) {
    case JobState::Pending: return "Pending";
    case JobState::Running: return "Running";
    case JobState::Succeeded: return "Succeeded";
    case JobState::Failed: return "Failed";
    case JobState::Cancelled: return "Cancelled";
  }
  return "?";
}

JobState job_state_from_string(const std::string& s) {
  for (JobState st : {JobState::Pending, JobState::Running, JobState::Succeeded, JobState::Failed,
                      JobState::Cancelled}) {
    if (to_string(st) == s) return st;
  }
  throw MalformedFile("unknown job state '" + s + "'");
}

bool is_terminal(JobState s) {
  return s == JobState::Succeeded || s == JobState::Failed || s == JobState::Cancelled;
}

bool legal_transition(JobState from, JobState to) {
  if (from == JobState::Pending) return to == JobState::Running || to == JobState::Cancelled;
  if (from == JobState::Running) return is_terminal(to);
  return false;
}

json JobRecord::to_json() const {
  return {{"job_id", job_id},         {"session", session},         {"config", config},
          {"state", to_string(state)}, {"created_ms", created_ms},   {"started_ms", started_ms},
          {"ended_ms", ended_ms},      {"error", error},             {"artifacts", artifacts},
          {"summary", summary}};
}

JobRecord JobRecord::from_json(const json& j) {
  JobRecord r;
  r.job_id = j.at("job_id").get<std::string>();
  r.session = j.at("session").get<std::string>();
  r.config = j.at("config");
  r.state = job_state_from_string(j.at("state").get<std::string>());
  r.created_ms = j.at("created_ms").get<std::int64_t>();
  r.started_ms = j.at("started_ms").get<std::int64_t>();
  r.ended_ms = j.at("ended_ms").get<std::int64_t>();
  r.error = j.at("error").get<std::string>();
  r.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  r.summary = j.at("summary");
  return r;
}

json ServiceRow::to_json() const {
  json j = row.to_json();
  j["wall_ms"] = wall_ms;
  return j;
}

json SessionRecord::to_json() const {
  return {{"token", token}, {"saved_configs", saved_configs}, {"job_ids", job_ids},
          {"last_access_ms", last_access_ms}};
}

SessionRecord SessionRecord::from_json(const json& j) {
  SessionRecord r;
  r.token = j.at("token").get<std::string>();
  r.saved_configs = j.at("saved_configs");
  r.job_ids = j.at("job_ids").get<std::vector<std::string>>();
  r.last_access_ms = j.at("last_access_ms").get<std::int64_t>();
  return r;
}

json ServiceError::body() const {
  json j = {{"error", code_}, {"message", what()}};
  if (!details_.empty()) j["details"] = details_;
  return j;
}

// ---------------------------------------------------------------- Store

Store::Store(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (sqlite3_open(path.c_str(), &db_) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw IoError("cannot open store " + path.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("CREATE TABLE IF NOT EXISTS kv (ns TEXT NOT NULL, key TEXT NOT NULL, value TEXT NOT NULL, "
       "PRIMARY KEY (ns, key))");
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw IoError("store: " + msg);
  }
}

namespace {

struct Statement {
  Statement(sqlite3* db, const char* sql) : db(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt, nullptr) != SQLITE_OK) {
      throw IoError(std::string("store: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt); }
  void bind(int i, const std::string& s) { sqlite3_bind_text(stmt, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT); }
  int step() {
    const int rc = sqlite3_step(stmt);
    if (rc != SQLITE_ROW && rc != SQLITE_DONE) throw IoError(std::string("store: ") + sqlite3_errmsg(db));
    return rc;
  }
  std::string text(int col) {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, col))) : std::string();
  }

  sqlite3* db;
  sqlite3_stmt* stmt = nullptr;
};

}  // namespace

void Store::put(const std::string& ns, const std::string& key, const json& value) {
  std::lock_guard lock(mu_);
  Statement st(db_, "INSERT OR REPLACE INTO kv (ns, key, value) VALUES (?, ?, ?)");
  st.bind(1, ns);
  st.bind(2, key);
  st.bind(3, value.dump());
  st.step();
}

std::optional<json> Store::get(const std::string& ns, const std::string& key) {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT value FROM kv WHERE ns = ? AND key = ?");
  st.bind(1, ns);
  st.bind(2, key);
  if (st.step() != SQLITE_ROW) return std::nullopt;
  return json::parse(st.text(0));
}

std::vector<std::pair<std::string, json>> Store::list(const std::string& ns) {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT key, value FROM kv WHERE ns = ? ORDER BY key");
  st.bind(1, ns);
  std::vector<std::pair<std::string, json>> out;
  while (st.step() == SQLITE_ROW) out.emplace_back(st.text(0), json::parse(st.text(1)));
  return out;
}

void Store::erase(const std::string& ns, const std::string& key) {
  std::lock_guard lock(mu_);
  Statement st(db_, "DELETE FROM kv WHERE ns = ? AND key = ?");
  st.bind(1, ns);
  st.bind(2, key);
  st.step();
}

// -------------------------------------------------------------- Service

ServiceOptions ServiceOptions::from_env() {
  ServiceOptions o;
  if (const char* dir = std::getenv("PNRL_DATA_DIR"); dir && *dir) o.data_dir = dir;
  if (const char* mp = std::getenv("PNRL_MAX_PARALLEL"); mp && *mp) {
    const long v = std::strtol(mp, nullptr, 10);
    if (v < 1) throw ConfigError("PNRL_MAX_PARALLEL", "must be a positive integer");
    o.max_parallel = static_cast<std::size_t>(v);
  }
  return o;
}

Service::Service(ServiceOptions options)
    : options_(std::move(options)), store_(options_.data_dir / "store.sqlite") {
  if (options_.max_parallel < 1) throw ConfigError("max_parallel", "must be >= 1");
  recover();
  workers_.reserve(options_.max_parallel);
  for (std::size_t i = 0; i < options_.max_parallel; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& w : workers_) w.join();
}

void Service::recover() {
  for (const auto& [key, value] : store_.list(kSessionsNs)) {
    sessions_.emplace(key, SessionRecord::from_json(value));
  }
  if (!sessions_.count(kDefaultSession)) {
    SessionRecord def;
    def.token = kDefaultSession;
    def.last_access_ms = now_ms();
    sessions_.emplace(def.token, def);
    persist(def);
  }

  std::vector<JobEntry*> pending;
  for (const auto& [key, value] : store_.list(kJobsNs)) {
    auto entry = std::make_unique<JobEntry>();
    entry->record = JobRecord::from_json(value);
    std::ifstream rows(job_dir(key) / "metrics.jsonl");
    std::string line;
    while (std::getline(rows, line)) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        break;  // torn final line after a crash
      }
      ServiceRow r;
      r.row = MetricRow::from_json(j);
      r.wall_ms = j.value("wall_ms", std::int64_t{0});
      entry->rows.push_back(std::move(r));
    }
    JobRecord& rec = entry->record;
    if (rec.state == JobState::Running) {
      rec.state = JobState::Failed;
      rec.error = "interrupted";
      rec.ended_ms = std::max(now_ms(), rec.started_ms);
      persist(rec);
      spdlog::warn("job {} was running at shutdown; marked Failed(interrupted)", rec.job_id);
    } else if (rec.state == JobState::Pending) {
      pending.push_back(entry.get());
    }
    jobs_.emplace(key, std::move(entry));
  }
  std::sort(pending.begin(), pending.end(), [](const JobEntry* a, const JobEntry* b) {
    return std::tie(a->record.created_ms, a->record.job_id) < std::tie(b->record.created_ms, b->record.job_id);
  });
  for (const JobEntry* e : pending) queue_.push_back(e->record.job_id);
  if (!pending.empty()) spdlog::info("re-enqueued {} pending job(s)", pending.size());
}

fs::path Service::job_dir(const std::string& job_id) const { return options_.data_dir / "jobs" / job_id; }

void Service::persist(const JobRecord& record) { store_.put(kJobsNs, record.job_id, record.to_json()); }

void Service::persist(const SessionRecord& record) { store_.put(kSessionsNs, record.token, record.to_json()); }

std::string Service::next_job_id() {
  std::uint64_t counter = 0;
  if (auto v = store_.get(kMetaNs, "job_counter")) counter = v->get<std::uint64_t>();
  ++counter;
  store_.put(kMetaNs, "job_counter", counter);
  std::ostringstream os;
  os << "job-" << std::setw(6) << std::setfill('0') << counter;
  return os.str();
}

std::string Service::login() {
  std::lock_guard lock(mu_);
  SessionRecord s;
  do {
    s.token = random_token();
  } while (sessions_.count(s.token));
  s.last_access_ms = now_ms();
  persist(s);
  sessions_.emplace(s.token, s);
  spdlog::info("session opened");
  return s.token;
}

void Service::logout(const std::string& token) {
  std::lock_guard lock(mu_);
  if (token == kDefaultSession) {
    throw ServiceError(400, "NotSupported", "the default session cannot be revoked");
  }
  if (!sessions_.erase(token)) throw ServiceError(401, "InvalidSession", "unknown session token");
  store_.erase(kSessionsNs, token);
  spdlog::info("session revoked");
}

std::string Service::resolve_session(const std::optional<std::string>& token) {
  const std::string key = token && !token->empty() ? *token : std::string(kDefaultSession);
  std::lock_guard lock(mu_);
  auto it = sessions_.find(key);
  if (it == sessions_.end()) throw ServiceError(401, "InvalidSession", "unknown session token");
  it->second.last_access_ms = std::max(it->second.last_access_ms, now_ms());
  return key;
}

SessionRecord Service::session_record(const std::string& session) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  if (it == sessions_.end()) throw ServiceError(401, "InvalidSession", "unknown session token");
  return it->second;
}

void Service::save_config(const std::string& session, const std::string& name, const json& config) {
  if (name.empty()) throw ServiceError(422, "InvalidConfig", "config name must not be empty");
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  if (it == sessions_.end()) throw ServiceError(401, "InvalidSession", "unknown session token");
  it->second.saved_configs[name] = config;
  it->second.last_access_ms = std::max(it->second.last_access_ms, now_ms());
  persist(it->second);
}

std::string Service::create_job(const std::string& session, const json& config) {
  InteractionConfig parsed;
  try {
    parsed = InteractionConfig::from_json(config);
    parsed.validate();
  } catch (const ConfigError& e) {
    json diags = json::array();
    for (const auto& d : e.diagnostics()) diags.push_back({{"field", d.field}, {"message", d.message}});
    throw ServiceError(422, "InvalidConfig", "config failed validation", diags);
  }

  std::string id;
  {
    std::lock_guard lock(mu_);
    auto sit = sessions_.find(session);
    if (sit == sessions_.end()) throw ServiceError(401, "InvalidSession", "unknown session token");
    if (stopping_) throw ServiceError(503, "ShuttingDown", "service is stopping");
    id = next_job_id();
    auto entry = std::make_unique<JobEntry>();
    entry->record.job_id = id;
    entry->record.session = session;
    entry->record.config = parsed.to_json();
    entry->record.created_ms = now_ms();
    persist(entry->record);
    sit->second.job_ids.push_back(id);
    persist(sit->second);
    jobs_.emplace(id, std::move(entry));
    queue_.push_back(id);
  }
  cv_.notify_one();
  spdlog::info("job {} created ({} on {})", id, to_string(parsed.mode), parsed.env_id);
  return id;
}

Service::JobEntry& Service::find(const std::string& session, const std::string& job_id) const {
  auto it = jobs_.find(job_id);
  if (it == jobs_.end() || it->second->record.session != session) {
    throw ServiceError(404, "UnknownJob", "no job '" + job_id + "'");
  }
  return *it->second;
}

JobRecord Service::get_job(const std::string& session, const std::string& job_id) const {
  std::lock_guard lock(mu_);
  return find(session, job_id).record;
}

std::vector<JobRecord> Service::list_jobs(const std::string& session) const {
  std::vector<JobRecord> out;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, entry] : jobs_) {
      if (entry->record.session == session) out.push_back(entry->record);
    }
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
    return std::tie(a.created_ms, a.job_id) > std::tie(b.created_ms, b.job_id);
  });
  return out;
}

std::vector<ServiceRow> Service::get_metrics(const std::string& session, const std::string& job_id,
                                             std::size_t after_seq) const {
  const JobEntry* entry = nullptr;
  {
    std::lock_guard lock(mu_);
    entry = &find(session, job_id);
  }
  // Entries are never removed, so the pointer stays valid.
  std::shared_lock rows_lock(entry->rows_mu);
  if (after_seq >= entry->rows.size()) return {};
  return {entry->rows.begin() + static_cast<std::ptrdiff_t>(after_seq), entry->rows.end()};
}

JobRecord Service::cancel_job(const std::string& session, const std::string& job_id) {
  std::lock_guard lock(mu_);
  JobEntry& entry = find(session, job_id);
  JobRecord& rec = entry.record;
  if (is_terminal(rec.state)) {
    throw ServiceError(409, "AlreadyTerminal", "job '" + job_id + "' is already " + to_string(rec.state));
  }
  if (rec.state == JobState::Pending) {
    apply_transition(rec, JobState::Cancelled);
    queue_.erase(std::remove(queue_.begin(), queue_.end(), job_id), queue_.end());
    cv_.notify_all();
    spdlog::info("job {} cancelled while pending", job_id);
  } else {
    entry.cancel = true;
    spdlog::info("job {} cancellation requested", job_id);
  }
  return rec;
}

std::size_t Service::running_count() const {
  std::lock_guard lock(mu_);
  return running_;
}

void Service::wait_idle() const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return queue_.empty() && running_ == 0; });
}

void Service::transition(JobEntry& entry, JobState to, const std::string& error) {
  std::lock_guard lock(mu_);
  apply_transition(entry.record, to, error);
}

void Service::apply_transition(JobRecord& rec, JobState to, const std::string& error) {
  if (!legal_transition(rec.state, to)) {
    throw std::logic_error("illegal job transition " + to_string(rec.state) + " -> " + to_string(to));
  }
  rec.state = to;
  if (to == JobState::Running) {
    rec.started_ms = std::max(now_ms(), rec.created_ms);
  } else {
    rec.ended_ms = std::max(now_ms(), std::max(rec.started_ms, rec.created_ms));
    if (to == JobState::Failed) rec.error = error;
  }
  persist(rec);
}

void Service::worker_loop() {
  for (;;) {
    JobEntry* entry = nullptr;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      const std::string id = queue_.front();
      queue_.pop_front();
      entry = jobs_.at(id).get();
      if (entry->record.state != JobState::Pending) continue;
      apply_transition(entry->record, JobState::Running);
      ++running_;
      std::size_t seen = max_running_.load();
      while (running_ > seen && !max_running_.compare_exchange_weak(seen, running_)) {
      }
    }
    run(*entry);
    {
      std::lock_guard lock(mu_);
      --running_;
    }
    cv_.notify_all();
  }
}

void Service::run(JobEntry& entry) {
  const std::string id = entry.record.job_id;
  spdlog::info("job {} running", id);

  const fs::path dir = job_dir(id);
  const fs::path artifacts = dir / "artifacts";
  JobResult result;
  JobState final_state = JobState::Succeeded;
  std::string error;
  try {
    fs::create_directories(artifacts);
    std::ofstream rows_out(dir / "metrics.jsonl", std::ios::app);
    JobHooks hooks;
    hooks.on_metric = [&](const MetricRow& row) {
      ServiceRow r{row, now_ms()};
      rows_out << r.to_json().dump() << '\n';
      rows_out.flush();
      std::unique_lock lock(entry.rows_mu);
      entry.rows.push_back(std::move(r));
    };
    hooks.should_stop = [&] { return entry.cancel.load() || stopping_.load(); };
    const InteractionConfig config = InteractionConfig::from_json(entry.record.config);
    result = run_job(config, artifacts, hooks);
    if (result.outcome == JobOutcome::Cancelled) {
      if (entry.cancel.load()) {
        final_state = JobState::Cancelled;
      } else {
        final_state = JobState::Failed;
        error = "interrupted";
      }
    }
  } catch (const std::exception& e) {
    final_state = JobState::Failed;
    error = e.what();
  }
  {
    std::lock_guard lock(mu_);
    for (const auto& p : result.artifacts) entry.record.artifacts.push_back(p.string());
    entry.record.summary = result.summary;
  }
  transition(entry, final_state, error);
  if (final_state == JobState::Failed) {
    spdlog::error("job {} failed: {}", id, error);
  } else {
    spdlog::info("job {} {}", id, to_string(final_state));
  }
}

// -------------------------------------------------------- catalog/schema

json Service::catalog() {
  json envs = json::array();
  for (const auto& id : builtin_env_ids()) {
    const JointEnvSpec spec = builtin_spec(id);
    json obs = json::array();
    json act = json::array();
    for (const auto& s : spec.obs_spaces) obs.push_back(to_json(s));
    for (const auto& s : spec.act_spaces) act.push_back(to_json(s));
    json optimal = nullptr;
    try {
      optimal = optimal_return(id);
    } catch (const NotSupported&) {
    }
    envs.push_back({{"id", id},
                    {"n_agents", spec.n_agents},
                    {"seats", spec.n_agents},
                    {"horizon", spec.horizon},
                    {"reward_structure", to_string(spec.reward_structure)},
                    {"obs_spaces", obs},
                    {"act_spaces", act},
                    {"optimal_return", optimal}});
  }

  auto param = [](const std::string& name, const std::string& type, json def, json min, json max) {
    return json{{"name", name}, {"type", type}, {"default", std::move(def)}, {"min", std::move(min)},
                {"max", std::move(max)}};
  };
  json algorithms = json::array();
  const std::vector<std::pair<Algo, std::string>> algos = {
      {Algo::TabularQ, "Tabular Q-learning"}, {Algo::Reinforce, "REINFORCE"}, {Algo::ActorCritic, "Advantage actor-critic"}};
  for (const auto& [algo, name] : algos) {
    const Hyperparams d = Hyperparams::defaults(algo);
    json hp = json::array({
        param("gamma", "number", d.gamma, 0.0, 1.0),
        param("lambda", "number", d.lambda, 0.0, 1.0),
        param("lr", "number", d.lr, 0.0, nullptr),
        param("entropy_coef", "number", d.entropy_coef, 0.0, nullptr),
        param("value_coef", "number", d.value_coef, 0.0, nullptr),
        param("epsilon", "number", d.epsilon, 0.0, 1.0),
        param("batch", "integer", d.batch, 1, nullptr),
        param("hidden", "integer", d.hidden, 1, nullptr),
    });
    json net = {{"name", "net"}, {"type", "enum"}, {"default", nullptr}, {"values", {"table", "mlp"}}};
    hp.push_back(net);
    algorithms.push_back({{"id", algo_id(algo)},
                          {"name", name},
                          {"critic", algo == Algo::ActorCritic},
                          {"hyperparams", hp}});
  }

  return {{"envs", envs},
          {"algorithms", algorithms},
          {"algorithm_aliases", {{"ppo", "a2c"}}},
          {"modes", {"train", "adapt", "adhoc_eval", "cross_play"}},
          {"sampling", {"round_robin", "uniform_random"}},
          {"agent_kinds",
           json::array({
               {{"prefix", "learn:<algo>[:key=value,...]"}, {"frozen", false},
                {"extra_keys", {"updates", "init"}}},
               {{"prefix", "static:<policy-file>"}, {"frozen", true}},
               {{"prefix", "static:const:<action>"}, {"frozen", true}},
               {{"prefix", "static:uniform"}, {"frozen", true}},
           })}};
}

json Service::schema() {
  json config = {
      {"type", "object"},
      {"additionalProperties", false},
      {"required", {"mode", "env_id"}},
      {"properties",
       {{"mode", {{"type", "string"}, {"enum", {"train", "adapt", "adhoc_eval", "cross_play"}}}},
        {"env_id", {{"type", "string"}, {"description", "id from /api/catalog envs"}}},
        {"ego", {{"type", "string"}, {"description", "agent id for seat 0"}}},
        {"seats",
         {{"type", "array"},
          {"description", "seats[k] configures joint seat k + 1"},
          {"items",
           {{"type", "object"},
            {"properties",
             {{"sampling", {{"type", "string"}, {"enum", {"round_robin", "uniform_random"}}, {"default", "round_robin"}}},
              {"partners", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}}}}},
        {"total_timesteps", {{"type", "integer"}, {"minimum", 1}, {"default", 10000}}},
        {"master_seed", {{"type", "integer"}, {"minimum", 0}, {"default", 0}}},
        {"eval_episodes", {{"type", "integer"}, {"minimum", 1}, {"default", 100}}},
        {"population", {{"type", "array"}, {"items", {{"type", "string"}}}, {"description", "cross_play only"}}},
        {"save_trajectory", {{"type", "boolean"}, {"default", true}}}}}};

  json job = {{"type", "object"},
              {"properties",
               {{"job_id", {{"type", "string"}}},
                {"session", {{"type", "string"}}},
                {"config", {{"$ref", "#/definitions/InteractionConfig"}}},
                {"state", {{"type", "string"}, {"enum", {"Pending", "Running", "Succeeded", "Failed", "Cancelled"}}}},
                {"created_ms", {{"type", "integer"}}},
                {"started_ms", {{"type", "integer"}, {"description", "0 until Running"}}},
                {"ended_ms", {{"type", "integer"}, {"description", "0 until terminal"}}},
                {"error", {{"type", "string"}}},
                {"artifacts", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                {"summary", {{"type", "object"}}}}}};

  json loss = {{"type", {"object", "null"}},
               {"properties",
                {{"policy_loss", {{"type", "number"}}},
                 {"value_loss", {{"type", "number"}}},
                 {"entropy", {{"type", "number"}}},
                 {"grad_norm", {{"type", "number"}}},
                 {"update_index", {{"type", "integer"}}}}}};
  json metric = {{"type", "object"},
                 {"properties",
                  {{"seq", {{"type", "integer"}, {"minimum", 1}}},
                   {"env_step", {{"type", "integer"}}},
                   {"episode", {{"type", "integer"}}},
                   {"mean_return", {{"type", "array"}, {"items", {{"type", "number"}}}}},
                   {"losses", {{"type", "array"}, {"items", loss}}},
                   {"wall_ms", {{"type", "integer"}}}}}};

  json error = {{"type", "object"},
                {"properties",
                 {{"error", {{"type", "string"}}},
                  {"message", {{"type", "string"}}},
                  {"details", {{"type", "array"},
                               {"items", {{"type", "object"},
                                          {"properties", {{"field", {{"type", "string"}}},
                                                          {"message", {{"type", "string"}}}}}}}}}}}};

  auto ep = [](const std::string& method, const std::string& path, json request, json response,
               std::vector<int> statuses) {
    return json{{"method", method}, {"path", path}, {"request", std::move(request)},
                {"response", std::move(response)}, {"status", statuses}};
  };
  json endpoints = json::array({
      ep("POST", "/api/session/login", nullptr, {{"token", "string"}}, {200}),
      ep("POST", "/api/session/logout", nullptr, {{"ok", "boolean"}}, {200, 400, 401}),
      ep("GET", "/api/session", nullptr, "SessionRecord", {200, 401}),
      ep("GET", "/api/session/configs", nullptr, "object name -> InteractionConfig", {200, 401}),
      ep("PUT", "/api/session/configs/{name}", "InteractionConfig", {{"ok", "boolean"}}, {200, 400, 401, 422}),
      ep("POST", "/api/jobs", "InteractionConfig", {{"job_id", "string"}}, {201, 400, 401, 422}),
      ep("GET", "/api/jobs", nullptr, "JobRecord[] (created descending)", {200, 401}),
      ep("GET", "/api/jobs/{id}", nullptr, "JobRecord", {200, 401, 404}),
      ep("GET", "/api/jobs/{id}/metrics?after={seq}", nullptr, "MetricRow[] with seq > after", {200, 400, 401, 404}),
      ep("POST", "/api/jobs/{id}/cancel", nullptr, "JobRecord", {200, 401, 404, 409}),
      ep("GET", "/api/catalog", nullptr, "catalog", {200}),
      ep("GET", "/api/schema", nullptr, "this document", {200}),
  });

  return {{"version", 1},
          {"content_type", "application/json"},
          {"session_header", "X-Session-Token (or Authorization: Bearer <token>); absent means the default session"},
          {"definitions",
           {{"InteractionConfig", config}, {"JobRecord", job}, {"MetricRow", metric}, {"Error", error}}},
          {"endpoints", endpoints}};
}

}  // namespace pnrl::service
