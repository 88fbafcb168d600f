#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnrl/errors.hpp"
#include "pnrl/job.hpp"

struct sqlite3;

namespace pnrl::service {

enum class JobState { Pending, Running, Succeeded, Failed, Cancelled };

std::string to_string(JobState s);
JobState job_state_from_string(const std::string& s);
bool is_terminal(JobState s);
// Pending->Running, Pending->Cancelled, Running->{Succeeded,Failed,Cancelled}.
bool legal_transition(JobState from, JobState to);

struct JobRecord {
  std::string job_id;
  std::string session;
  nlohmann::json config;
  JobState state = JobState::Pending;
  std::int64_t created_ms = 0;
  std::int64_t started_ms = 0;  // 0 until Running
  std::int64_t ended_ms = 0;    // 0 until terminal
  std::string error;            // Failed only
  std::vector<std::string> artifacts;
  nlohmann::json summary;

  nlohmann::json to_json() const;
  static JobRecord from_json(const nlohmann::json& j);
};

struct ServiceRow {
  MetricRow row;
  std::int64_t wall_ms = 0;

  nlohmann::json to_json() const;
};

struct SessionRecord {
  std::string token;
  nlohmann::json saved_configs = nlohmann::json::object();
  std::vector<std::string> job_ids;
  std::int64_t last_access_ms = 0;

  nlohmann::json to_json() const;
  static SessionRecord from_json(const nlohmann::json& j);
};

inline constexpr const char* kDefaultSession = "default";

// HTTP-mappable failure.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message,
               nlohmann::json details = nlohmann::json::object())
      : Error(code + ": " + message), status_(status), code_(std::move(code)), details_(std::move(details)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json details_;
};

// Embedded key-value store in a single SQLite file; access is serialized.
class Store {
 public:
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  void put(const std::string& ns, const std::string& key, const nlohmann::json& value);
  std::optional<nlohmann::json> get(const std::string& ns, const std::string& key);
  std::vector<std::pair<std::string, nlohmann::json>> list(const std::string& ns);
  void erase(const std::string& ns, const std::string& key);

 private:
  void exec(const char* sql);
  std::mutex mu_;
  sqlite3* db_ = nullptr;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "pnrl-data";
  std::size_t max_parallel = 4;

  // PNRL_DATA_DIR, PNRL_MAX_PARALLEL.
  static ServiceOptions from_env();
};

// Asynchronous job backend. Jobs run on a fixed pool of max_parallel
// workers; each job owns its session exclusively and publishes metric rows
// through an append-only log that any number of readers may poll.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::string login();
  void logout(const std::string& token);
  // No token: the default session. Unknown token: 401.
  std::string resolve_session(const std::optional<std::string>& token);
  SessionRecord session_record(const std::string& session);
  void save_config(const std::string& session, const std::string& name, const nlohmann::json& config);

  std::string create_job(const std::string& session, const nlohmann::json& config);
  JobRecord get_job(const std::string& session, const std::string& job_id) const;
  std::vector<JobRecord> list_jobs(const std::string& session) const;
  std::vector<ServiceRow> get_metrics(const std::string& session, const std::string& job_id,
                                      std::size_t after_seq) const;
  JobRecord cancel_job(const std::string& session, const std::string& job_id);

  static nlohmann::json catalog();
  static nlohmann::json schema();

  std::size_t running_count() const;
  std::size_t max_running_observed() const { return max_running_.load(); }
  const ServiceOptions& options() const { return options_; }
  std::filesystem::path job_dir(const std::string& job_id) const;

  // Blocks until no job is Pending or Running.
  void wait_idle() const;

 private:
  struct JobEntry {
    JobRecord record;
    mutable std::shared_mutex rows_mu;
    std::vector<ServiceRow> rows;
    std::atomic<bool> cancel{false};
  };

  void recover();
  void worker_loop();
  void run(JobEntry& entry);
  void transition(JobEntry& entry, JobState to, const std::string& error = {});
  // Caller holds mu_.
  void apply_transition(JobRecord& rec, JobState to, const std::string& error = {});
  void persist(const JobRecord& record);
  void persist(const SessionRecord& record);
  JobEntry& find(const std::string& session, const std::string& job_id) const;
  std::string next_job_id();

  ServiceOptions options_;
  Store store_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, std::unique_ptr<JobEntry>> jobs_;
  std::map<std::string, SessionRecord> sessions_;
  std::deque<std::string> queue_;
  std::size_t running_ = 0;
  std::atomic<std::size_t> max_running_{0};
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> workers_;
};

// Routes the HTTP API onto a Service. UI assets, when given, are served
// from the root path.
class HttpServer {
 public:
  HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~HttpServer();

  // Blocking.
  bool listen(const std::string& host, int port);
  // Binds `port` (0 picks a free one) and serves on a background thread.
  // Returns the bound port; throws IoError if binding fails.
  int start_background(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pnrl::service
