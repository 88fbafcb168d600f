#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include <httplib.h>

#include "pnrl/job.hpp"
#include "pnrl/service.hpp"
#include "support.hpp"

namespace pnrl::service {
namespace {

using pnrl::testing::TempDir;
namespace testing = pnrl::testing;

using nlohmann::json;

json rps_train(std::size_t steps, std::uint64_t seed) {
  return {{"mode", "train"},
          {"env_id", "rps"},
          {"ego", "learn:a2c:batch=16"},
          {"seats", {{{"partners", {"static:const:0", "learn:reinforce:batch=16"}}}}},
          {"total_timesteps", steps},
          {"master_seed", seed}};
}

json kitchen_train(std::size_t steps) {
  return {{"mode", "train"},
          {"env_id", "kitchen.pass"},
          {"ego", "learn:a2c"},
          {"seats", {{{"partners", {"learn:a2c"}}}}},
          {"total_timesteps", steps},
          {"master_seed", 1}};
}

ServiceOptions options(const TempDir& dir, std::size_t max_parallel = 4) {
  ServiceOptions o;
  o.data_dir = dir / "data";
  o.max_parallel = max_parallel;
  return o;
}

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds limit = std::chrono::seconds(60)) {
  const auto until = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < until) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return pred();
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

TEST(JobStateMachine, LegalTransitions) {
  const std::vector<JobState> all = {JobState::Pending, JobState::Running, JobState::Succeeded, JobState::Failed,
                                     JobState::Cancelled};
  std::set<std::pair<JobState, JobState>> legal = {
      {JobState::Pending, JobState::Running},   {JobState::Pending, JobState::Cancelled},
      {JobState::Running, JobState::Succeeded}, {JobState::Running, JobState::Failed},
      {JobState::Running, JobState::Cancelled}};
  for (JobState a : all) {
    EXPECT_EQ(job_state_from_string(to_string(a)), a);
    for (JobState b : all) EXPECT_EQ(legal_transition(a, b), legal.count({a, b}) == 1) << to_string(a) << to_string(b);
  }
  EXPECT_FALSE(is_terminal(JobState::Running));
  EXPECT_TRUE(is_terminal(JobState::Cancelled));
}

TEST(JobRecord, JsonRoundTrip) {
  JobRecord r;
  r.job_id = "job-000007";
  r.session = "s";
  r.config = rps_train(10, 1);
  r.state = JobState::Failed;
  r.created_ms = 1;
  r.started_ms = 2;
  r.ended_ms = 3;
  r.error = "boom";
  r.artifacts = {"a", "b"};
  r.summary = {{"k", 1}};
  EXPECT_EQ(JobRecord::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(Service, ParallelJobsMatchSerialRuns) {
  TempDir dir;
  std::vector<std::string> ids;
  {
    Service svc(options(dir, 4));
    for (std::uint64_t s = 0; s < 6; ++s) ids.push_back(svc.create_job(kDefaultSession, rps_train(3000, s)));
    EXPECT_EQ(ids.front(), "job-000001");
    EXPECT_EQ(ids.back(), "job-000006");
    svc.wait_idle();
    EXPECT_LE(svc.max_running_observed(), 4u);
    EXPECT_GE(svc.max_running_observed(), 1u);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const JobRecord r = svc.get_job(kDefaultSession, ids[i]);
      ASSERT_EQ(r.state, JobState::Succeeded) << r.error;
      EXPECT_LE(r.created_ms, r.started_ms);
      EXPECT_LE(r.started_ms, r.ended_ms);
      EXPECT_EQ(r.artifacts.size(), 6u);
      TempDir serial;
      run_job(InteractionConfig::from_json(rps_train(3000, i)), serial.path());
      EXPECT_EQ(testing::tree_contents(svc.job_dir(ids[i]) / "artifacts"), testing::tree_contents(serial.path()))
          << ids[i];
    }
    const auto listed = svc.list_jobs(kDefaultSession);
    ASSERT_EQ(listed.size(), 6u);
    EXPECT_EQ(listed.front().job_id, "job-000006");
  }
}

TEST(Service, MaxParallelOneSerializes) {
  TempDir dir;
  Service svc(options(dir, 1));
  for (std::uint64_t s = 0; s < 3; ++s) svc.create_job(kDefaultSession, rps_train(500, s));
  svc.wait_idle();
  EXPECT_EQ(svc.max_running_observed(), 1u);
}

TEST(Service, MetricsArePrefixesDuringRun) {
  TempDir dir;
  Service svc(options(dir));
  const std::string id = svc.create_job(kDefaultSession, rps_train(20000, 5));
  std::vector<ServiceRow> seen;
  std::size_t polls = 0;
  for (;;) {
    const JobState state = svc.get_job(kDefaultSession, id).state;
    auto rows = svc.get_metrics(kDefaultSession, id, seen.size());
    for (auto& r : rows) {
      ASSERT_EQ(r.row.seq, seen.size() + 1);
      if (!seen.empty()) {
        ASSERT_GE(r.row.env_step, seen.back().row.env_step);
        ASSERT_GE(r.wall_ms, seen.back().wall_ms);
      }
      seen.push_back(std::move(r));
    }
    ++polls;
    if (is_terminal(state) && svc.get_metrics(kDefaultSession, id, seen.size()).empty()) break;
  }
  EXPECT_EQ(svc.get_job(kDefaultSession, id).state, JobState::Succeeded);
  EXPECT_EQ(seen.size(), 20000u);
  EXPECT_GT(polls, 1u);
  // A full fetch equals the incrementally assembled sequence.
  const auto all = svc.get_metrics(kDefaultSession, id, 0);
  ASSERT_EQ(all.size(), seen.size());
  for (std::size_t i = 0; i < all.size(); i += 997) EXPECT_EQ(all[i].to_json(), seen[i].to_json());
  EXPECT_TRUE(svc.get_metrics(kDefaultSession, id, 1000000).empty());
}

TEST(Service, CancelPendingAndRunning) {
  TempDir dir;
  Service svc(options(dir, 1));
  const std::string running = svc.create_job(kDefaultSession, kitchen_train(10000000));
  const std::string pending = svc.create_job(kDefaultSession, kitchen_train(100));
  ASSERT_TRUE(eventually([&] { return !svc.get_metrics(kDefaultSession, running, 0).empty(); }));

  const JobRecord p = svc.cancel_job(kDefaultSession, pending);
  EXPECT_EQ(p.state, JobState::Cancelled);
  EXPECT_EQ(status_of([&] { svc.cancel_job(kDefaultSession, pending); }), 409);

  svc.cancel_job(kDefaultSession, running);
  const std::size_t at_cancel = svc.get_metrics(kDefaultSession, running, 0).back().row.env_step;
  ASSERT_TRUE(eventually([&] { return is_terminal(svc.get_job(kDefaultSession, running).state); }));
  const JobRecord r = svc.get_job(kDefaultSession, running);
  EXPECT_EQ(r.state, JobState::Cancelled);
  const std::size_t final_steps = r.summary.at("env_steps").get<std::size_t>();
  EXPECT_LE(final_steps, at_cancel + 40);
  EXPECT_LT(final_steps, 10000000u);
  // Partial artifacts are still written.
  EXPECT_TRUE(std::filesystem::exists(svc.job_dir(running) / "artifacts" / "ego.pnrlpol"));
  svc.wait_idle();
  EXPECT_EQ(svc.get_job(kDefaultSession, pending).started_ms, 0);
}

TEST(Service, ErrorStatuses) {
  TempDir dir;
  Service svc(options(dir));
  EXPECT_EQ(status_of([&] { svc.get_job(kDefaultSession, "job-999999"); }), 404);
  EXPECT_EQ(status_of([&] { svc.get_metrics(kDefaultSession, "nope", 0); }), 404);
  json bad = rps_train(10, 1);
  bad["env_id"] = "chess";
  try {
    svc.create_job(kDefaultSession, bad);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 422);
    EXPECT_EQ(e.body().at("details")[0].at("field"), "env_id");
  }
  EXPECT_EQ(status_of([&] { svc.create_job(kDefaultSession, json::array()); }), 422);
  EXPECT_EQ(status_of([&] { svc.resolve_session("forged"); }), 401);
  EXPECT_EQ(status_of([&] { svc.logout(kDefaultSession); }), 400);
  EXPECT_EQ(status_of([&] { svc.logout("forged"); }), 401);
}

TEST(Service, SessionsAreIsolated) {
  TempDir dir;
  Service svc(options(dir));
  const std::string a = svc.login();
  const std::string b = svc.login();
  EXPECT_NE(a, b);
  EXPECT_EQ(svc.resolve_session(a), a);
  EXPECT_EQ(svc.resolve_session(std::nullopt), kDefaultSession);
  const std::string id = svc.create_job(a, rps_train(100, 1));
  EXPECT_EQ(status_of([&] { svc.get_job(b, id); }), 404);
  EXPECT_EQ(status_of([&] { svc.cancel_job(b, id); }), 404);
  EXPECT_EQ(status_of([&] { svc.get_metrics(b, id, 0); }), 404);
  EXPECT_TRUE(svc.list_jobs(b).empty());
  EXPECT_EQ(svc.list_jobs(a).size(), 1u);
  svc.save_config(a, "mine", rps_train(5, 5));
  EXPECT_TRUE(svc.session_record(b).saved_configs.empty());
  EXPECT_EQ(svc.session_record(a).saved_configs.at("mine"), rps_train(5, 5));
  svc.logout(b);
  EXPECT_EQ(status_of([&] { svc.resolve_session(b); }), 401);
  svc.wait_idle();
}

TEST(Service, NonFiniteGradientFailsOnlyThatJob) {
  TempDir dir;
  Service svc(options(dir, 2));
  json boom = rps_train(5000, 1);
  boom["ego"] = "learn:a2c:batch=4,lr=1e300";
  const std::string bad = svc.create_job(kDefaultSession, boom);
  const std::string good = svc.create_job(kDefaultSession, rps_train(2000, 2));
  svc.wait_idle();
  const JobRecord b = svc.get_job(kDefaultSession, bad);
  EXPECT_EQ(b.state, JobState::Failed);
  EXPECT_NE(b.error.find("NonFiniteGradient"), std::string::npos) << b.error;
  EXPECT_EQ(svc.get_job(kDefaultSession, good).state, JobState::Succeeded);
}

TEST(Service, StateSurvivesRestart) {
  TempDir dir;
  std::string session, done_id;
  std::map<std::string, std::string> artifacts;
  {
    Service svc(options(dir));
    session = svc.login();
    svc.save_config(session, "c", rps_train(5, 5));
    done_id = svc.create_job(session, rps_train(500, 3));
    svc.wait_idle();
    artifacts = testing::tree_contents(svc.job_dir(done_id) / "artifacts");
  }
  Service svc(options(dir));
  EXPECT_EQ(svc.get_job(session, done_id).state, JobState::Succeeded);
  EXPECT_EQ(svc.session_record(session).saved_configs.at("c"), rps_train(5, 5));
  EXPECT_EQ(svc.get_metrics(session, done_id, 0).size(), 500u);
  EXPECT_EQ(testing::tree_contents(svc.job_dir(done_id) / "artifacts"), artifacts);
  EXPECT_EQ(svc.create_job(session, rps_train(5, 1)), "job-000002");
  svc.wait_idle();
}

TEST(Service, GracefulShutdownInterruptsRunningJob) {
  TempDir dir;
  std::string id;
  {
    Service svc(options(dir));
    id = svc.create_job(kDefaultSession, kitchen_train(10000000));
    ASSERT_TRUE(eventually([&] { return !svc.get_metrics(kDefaultSession, id, 0).empty(); }));
  }
  Service svc(options(dir));
  const JobRecord r = svc.get_job(kDefaultSession, id);
  EXPECT_EQ(r.state, JobState::Failed);
  EXPECT_EQ(r.error, "interrupted");
}

// Simulates a crash by writing the store the way a killed process leaves it.
TEST(Service, RecoveryAfterCrash) {
  TempDir dir;
  const ServiceOptions o = options(dir);
  {
    Store store(o.data_dir / "store.sqlite");
    JobRecord running;
    running.job_id = "job-000001";
    running.session = kDefaultSession;
    running.config = rps_train(200, 1);
    running.state = JobState::Running;
    running.created_ms = 10;
    running.started_ms = 11;
    store.put("jobs", running.job_id, running.to_json());
    JobRecord pending = running;
    pending.job_id = "job-000002";
    pending.state = JobState::Pending;
    pending.started_ms = 0;
    store.put("jobs", pending.job_id, pending.to_json());
    store.put("meta", "job_counter", 2);
    std::filesystem::create_directories(o.data_dir / "jobs" / "job-000001");
    MetricRow row;
    row.seq = 1;
    row.env_step = 1;
    row.mean_return = {0.0, 0.0};
    row.losses = {std::nullopt, std::nullopt};
    ServiceRow sr{row, 123};
    testing::write_text(o.data_dir / "jobs" / "job-000001" / "metrics.jsonl",
                        sr.to_json().dump() + "\n{\"seq\": 2, \"env_st");
  }
  Service svc(o);
  const JobRecord r1 = svc.get_job(kDefaultSession, "job-000001");
  EXPECT_EQ(r1.state, JobState::Failed);
  EXPECT_EQ(r1.error, "interrupted");
  const auto rows = svc.get_metrics(kDefaultSession, "job-000001", 0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].wall_ms, 123);
  svc.wait_idle();
  EXPECT_EQ(svc.get_job(kDefaultSession, "job-000002").state, JobState::Succeeded);
  EXPECT_EQ(svc.create_job(kDefaultSession, rps_train(5, 1)), "job-000003");
  svc.wait_idle();
}

TEST(Service, CatalogAndSchema) {
  const json c = Service::catalog();
  std::set<std::string> envs;
  for (const auto& e : c.at("envs")) envs.insert(e.at("id").get<std::string>());
  EXPECT_EQ(envs, (std::set<std::string>{"matrix.coord", "rps", "kitchen.pass"}));
  for (const auto& e : c.at("envs")) {
    if (e.at("id") == "kitchen.pass") {
      EXPECT_EQ(e.at("optimal_return"), json({10.0, 10.0}));
    }
  }
  std::set<std::string> algos;
  for (const auto& a : c.at("algorithms")) algos.insert(a.at("id").get<std::string>());
  EXPECT_EQ(algos, (std::set<std::string>{"q", "reinforce", "a2c"}));
  const json s = Service::schema();
  for (const char* d : {"InteractionConfig", "JobRecord", "MetricRow", "Error"}) {
    EXPECT_TRUE(s.at("definitions").contains(d)) << d;
  }
  EXPECT_FALSE(s.at("endpoints").empty());
}

// ---------------------------------------------------------------- HTTP

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    std::filesystem::create_directories(dir_ / "ui");
    testing::write_text(dir_ / "ui" / "index.html", "<html>pnrl</html>");
    svc_ = std::make_unique<Service>(options(dir_));
    server_ = std::make_unique<HttpServer>(*svc_, dir_ / "ui");
    port_ = server_->start_background("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_->stop();
    svc_->wait_idle();
  }

  httplib::Result post(const std::string& path, const json& body, const httplib::Headers& h = {}) {
    return client_->Post(path, h, body.dump(), "application/json");
  }

  TempDir dir_;
  std::unique_ptr<Service> svc_;
  std::unique_ptr<HttpServer> server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(Http, JobLifecycle) {
  auto res = post("/api/jobs", rps_train(300, 2));
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const std::string id = json::parse(res->body).at("job_id");
  svc_->wait_idle();

  res = client_->Get("/api/jobs/" + id);
  ASSERT_EQ(res->status, 200);
  const json rec = json::parse(res->body);
  EXPECT_EQ(rec.at("state"), "Succeeded");
  EXPECT_EQ(rec.at("job_id"), id);

  res = client_->Get("/api/jobs/" + id + "/metrics?after=290");
  ASSERT_EQ(res->status, 200);
  const json rows = json::parse(res->body);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].at("seq"), 291);
  EXPECT_EQ(rows[0].at("job_id"), id);
  EXPECT_TRUE(rows[0].contains("wall_ms"));

  EXPECT_EQ(client_->Get("/api/jobs/" + id + "/metrics?after=-1")->status, 400);
  EXPECT_EQ(client_->Get("/api/jobs/" + id + "/metrics?after=x")->status, 400);
  EXPECT_EQ(post("/api/jobs/" + id + "/cancel", json::object())->status, 409);
  EXPECT_EQ(client_->Get("/api/jobs/job-424242")->status, 404);

  res = client_->Get("/api/jobs");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).size(), 1u);
}

TEST_F(Http, ValidationErrors) {
  json bad = rps_train(10, 1);
  bad["ego"] = "learn:nope";
  auto res = post("/api/jobs", bad);
  ASSERT_EQ(res->status, 422);
  const json body = json::parse(res->body);
  EXPECT_EQ(body.at("error"), "InvalidConfig");
  EXPECT_EQ(body.at("details")[0].at("field"), "ego");
  res = client_->Post("/api/jobs", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(client_->Get("/api/nothing")->status, 404);
  EXPECT_EQ(json::parse(client_->Get("/api/nothing")->body).at("error"), "NotFound");
}

TEST_F(Http, SessionsByHeader) {
  auto res = post("/api/session/login", json::object());
  ASSERT_EQ(res->status, 200);
  const std::string token = json::parse(res->body).at("token");
  const httplib::Headers mine = {{"X-Session-Token", token}};
  const httplib::Headers bearer = {{"Authorization", "Bearer " + token}};
  res = post("/api/jobs", rps_train(50, 1), mine);
  ASSERT_EQ(res->status, 201);
  const std::string id = json::parse(res->body).at("job_id");
  EXPECT_EQ(client_->Get("/api/jobs/" + id, bearer)->status, 200);
  EXPECT_EQ(client_->Get("/api/jobs/" + id)->status, 404);
  EXPECT_EQ(client_->Get("/api/jobs", {{"X-Session-Token", "forged"}})->status, 401);

  res = client_->Put("/api/session/configs/first", mine, rps_train(5, 5).dump(), "application/json");
  EXPECT_EQ(res->status, 200);
  res = client_->Get("/api/session/configs", mine);
  EXPECT_EQ(json::parse(res->body).at("first"), rps_train(5, 5));
  res = client_->Get("/api/session", mine);
  EXPECT_EQ(json::parse(res->body).at("job_ids"), json({id}));

  EXPECT_EQ(post("/api/session/logout", json::object())->status, 401);
  EXPECT_EQ(post("/api/session/logout", json::object(), {{"X-Session-Token", "default"}})->status, 400);
  EXPECT_EQ(post("/api/session/logout", json::object(), mine)->status, 200);
  EXPECT_EQ(client_->Get("/api/jobs", mine)->status, 401);
}

TEST_F(Http, CatalogSchemaAndStaticUi) {
  auto res = client_->Get("/api/catalog");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), Service::catalog());
  res = client_->Get("/api/schema");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), Service::schema());
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  res = client_->Get("/index.html");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>pnrl</html>");
  res = client_->Get("/");
  ASSERT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>pnrl</html>");
}

}  // namespace
}  // namespace pnrl::service
