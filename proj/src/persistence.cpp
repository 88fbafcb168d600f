#include "pnrl/persistence.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "pnrl/bytes.hpp"
#include "pnrl/digest.hpp"
#include "pnrl/errors.hpp"

namespace pnrl {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- framing

std::string frame(std::string_view magic, const json& header, std::string_view body) {
  const std::string hdr = header.dump();
  std::string out;
  out.reserve(magic.size() + 12 + hdr.size() + body.size());
  out.append(magic);
  bytes::put_u32(out, kFormatVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(hdr.size()));
  out.append(hdr);
  out.append(body);
  bytes::put_u32(out, crc32(out));
  return out;
}

Frame unframe(std::string_view data, std::string_view expected_magic) {
  constexpr std::size_t kFixed = 8 + 4 + 4 + 4;
  if (data.size() < kFixed) throw ChecksumMismatch("file too short (" + std::to_string(data.size()) + " bytes)");
  const std::string_view covered = data.substr(0, data.size() - 4);
  bytes::Reader tail(data.substr(data.size() - 4));
  const std::uint32_t stored = tail.get_u32();
  if (crc32(covered) != stored) throw ChecksumMismatch("CRC-32 does not match contents");

  bytes::Reader r(covered);
  Frame f;
  f.magic = std::string(r.take(8));
  if (f.magic != expected_magic) {
    throw MalformedFile("expected magic '" + std::string(expected_magic) + "', found '" + f.magic + "'");
  }
  f.version = r.get_u32();
  if (f.version != kFormatVersion) throw VersionUnsupported("format version " + std::to_string(f.version));
  const std::uint32_t hdr_len = r.get_u32();
  const std::string_view hdr = r.take(hdr_len);
  try {
    f.header = json::parse(hdr);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("header is not valid JSON: ") + e.what());
  }
  if (!f.header.is_object()) throw MalformedFile("header must be a JSON object");
  f.body = covered.substr(r.position());
  return f;
}

// ---------------------------------------------------------------- files

void write_file_atomic(const fs::path& path, std::string_view data) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("rename to '" + path.string() + "' failed: " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- policy

std::string encode_policy(const Policy& policy, const json& metadata) {
  const PolicyParams& pp = policy.params;
  if (pp.values.size() != pp.expected_size()) throw ShapeMismatch("parameter vector does not match declared shape");
  json header = {
      {"algo", algo_id(policy.algo)},
      {"hyperparams", policy.hp.to_json()},
      {"obs_space", to_json(policy.obs_space)},
      {"act_space", to_json(policy.act_space)},
      {"kind", to_string(pp.kind)},
      {"has_critic", pp.has_critic},
      {"param_count", pp.values.size()},
      {"metadata", metadata},
  };
  if (pp.kind == ParamKind::Table) {
    header["table"] = {pp.n_states, pp.n_actions};
  } else {
    header["layers"] = pp.layers;
  }
  std::string body;
  body.reserve(8 + 8 * pp.values.size());
  bytes::put_u64(body, pp.values.size());
  for (double v : pp.values) bytes::put_f64(body, v);
  return frame(kPolicyMagic, header, body);
}

LoadedPolicy decode_policy(std::string_view data) {
  const Frame f = unframe(data, kPolicyMagic);
  LoadedPolicy out;
  Policy& p = out.policy;
  try {
    const json& h = f.header;
    p.algo = algo_from_id(h.at("algo").get<std::string>());
    p.hp = Hyperparams::from_json(h.at("hyperparams"));
    p.obs_space = space_from_json(h.at("obs_space"));
    p.act_space = space_from_json(h.at("act_space"));
    p.params.kind = param_kind_from_string(h.at("kind").get<std::string>());
    p.params.has_critic = h.at("has_critic").get<bool>();
    if (p.params.kind == ParamKind::Table) {
      const auto dims = h.at("table").get<std::vector<std::size_t>>();
      if (dims.size() != 2) throw MalformedFile("table dims must have two entries");
      p.params.n_states = dims[0];
      p.params.n_actions = dims[1];
    } else {
      p.params.layers = h.at("layers").get<std::vector<std::size_t>>();
      if (p.params.layers.size() < 2) throw MalformedFile("mlp needs at least two layer sizes");
      p.params.n_actions = static_cast<std::size_t>(p.act_space.n);
    }
    out.metadata = h.value("metadata", json::object());
    const auto declared = h.at("param_count").get<std::size_t>();
    if (declared != p.params.expected_size()) throw MalformedFile("param_count does not match declared shape");
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("bad policy header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedFile(std::string("bad policy header: ") + e.what());
  }
  bytes::Reader r(f.body);
  const std::uint64_t count = r.get_u64();
  if (count != p.params.expected_size() || r.remaining() != count * 8) {
    throw MalformedFile("payload length does not match declared shape");
  }
  p.params.values.resize(count);
  for (auto& v : p.params.values) v = r.get_f64();
  return out;
}

void save_policy(const Policy& policy, const fs::path& path, const json& metadata) {
  write_file_atomic(path, encode_policy(policy, metadata));
}

LoadedPolicy load_policy(const fs::path& path) { return decode_policy(read_file(path)); }

void check_fits(const Policy& policy, const ProjectedView& seat) {
  if (policy.obs_space != seat.obs_space || policy.act_space != seat.act_space) {
    throw ShapeMismatch("policy " + to_string(policy.obs_space) + "/" + to_string(policy.act_space) +
                        " does not fit seat " + std::to_string(seat.agent_index) + " (" +
                        to_string(seat.obs_space) + "/" + to_string(seat.act_space) + ")");
  }
}

// ---------------------------------------------------------------- trajectory

TrajectoryHeader TrajectoryHeader::for_env(const JointEnvSpec& spec, std::optional<std::uint64_t> seed) {
  TrajectoryHeader h;
  h.env_id = spec.env_id;
  h.n_agents = spec.n_agents;
  h.horizon = spec.horizon;
  h.obs_spaces = spec.obs_spaces;
  h.act_spaces = spec.act_spaces;
  h.seed = seed;
  return h;
}

namespace {

void put_obs(std::string& out, const SpaceSpec& space, const Observation& obs) {
  if (!validate(space, obs)) throw MalformedFile("observation " + to_string(obs) + " not in " + to_string(space));
  if (space.kind == SpaceKind::Discrete) {
    bytes::put_i64(out, std::get<std::int64_t>(obs));
  } else {
    for (double v : std::get<std::vector<double>>(obs)) bytes::put_f64(out, v);
  }
}

Observation get_obs(bytes::Reader& r, const SpaceSpec& space) {
  Observation obs;
  if (space.kind == SpaceKind::Discrete) {
    obs = r.get_i64();
  } else {
    std::vector<double> v(space.low.size());
    for (auto& x : v) x = r.get_f64();
    obs = std::move(v);
  }
  if (!validate(space, obs)) throw MalformedFile("observation " + to_string(obs) + " not in " + to_string(space));
  return obs;
}

std::size_t obs_bytes(const SpaceSpec& space) { return space.kind == SpaceKind::Discrete ? 8 : 8 * space.low.size(); }

std::size_t record_bytes(const TrajectoryHeader& h) {
  std::size_t size = 8 + 1;
  for (const auto& s : h.obs_spaces) size += 2 * obs_bytes(s);
  size += h.n_agents * (8 + 8);
  return size;
}

void check_header(const TrajectoryHeader& h) {
  if (h.n_agents < 1 || h.obs_spaces.size() != h.n_agents || h.act_spaces.size() != h.n_agents) {
    throw MalformedFile("n_agents does not match the declared space lists");
  }
  if (h.horizon < 1) throw MalformedFile("horizon must be >= 1");
}

// Episodes must be complete: t counts 0,1,... within an episode, restarts
// after done, never reaches the horizon, and the final record is done.
void check_episode_structure(const std::vector<JointStep>& steps, std::size_t horizon) {
  std::size_t expected_t = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const JointStep& js = steps[k];
    if (js.t != expected_t) {
      throw MalformedFile("record " + std::to_string(k) + " has t=" + std::to_string(js.t) + ", expected " +
                          std::to_string(expected_t));
    }
    if (js.t + 1 == horizon && !js.done) throw MalformedFile("record " + std::to_string(k) + " passes the horizon");
    expected_t = js.done ? 0 : js.t + 1;
  }
  if (!steps.empty() && !steps.back().done) throw MalformedFile("final record does not end an episode");
}

}  // namespace

std::string encode_trajectory(const Trajectory& traj) {
  const TrajectoryHeader& h = traj.header;
  check_header(h);
  const std::size_t n = h.n_agents;
  std::string body;
  body.reserve(traj.steps.size() * record_bytes(h));
  for (const auto& js : traj.steps) {
    if (js.obs.size() != n || js.actions.size() != n || js.rewards.size() != n || js.next_obs.size() != n) {
      throw MalformedFile("step " + std::to_string(js.t) + " does not have n_agents=" + std::to_string(n) + " entries");
    }
    bytes::put_u64(body, js.t);
    for (std::size_t i = 0; i < n; ++i) put_obs(body, h.obs_spaces[i], js.obs[i]);
    for (std::size_t i = 0; i < n; ++i) {
      if (!validate(h.act_spaces[i], Observation{js.actions[i]})) throw MalformedFile("action out of space");
      bytes::put_i64(body, js.actions[i]);
    }
    for (std::size_t i = 0; i < n; ++i) bytes::put_f64(body, js.rewards[i]);
    bytes::put_u8(body, js.done ? 1 : 0);
    for (std::size_t i = 0; i < n; ++i) put_obs(body, h.obs_spaces[i], js.next_obs[i]);
  }
  check_episode_structure(traj.steps, h.horizon);

  json header = {{"env_id", h.env_id},
                 {"n_agents", h.n_agents},
                 {"horizon", h.horizon},
                 {"record_count", traj.steps.size()},
                 {"metadata", h.metadata}};
  json obs = json::array(), act = json::array();
  for (const auto& s : h.obs_spaces) obs.push_back(to_json(s));
  for (const auto& s : h.act_spaces) act.push_back(to_json(s));
  header["obs_spaces"] = obs;
  header["act_spaces"] = act;
  header["seed"] = h.seed ? json(*h.seed) : json(nullptr);
  return frame(kTrajectoryMagic, header, body);
}

Trajectory decode_trajectory(std::string_view data) {
  const Frame f = unframe(data, kTrajectoryMagic);
  Trajectory traj;
  TrajectoryHeader& h = traj.header;
  std::size_t record_count = 0;
  try {
    const json& j = f.header;
    h.env_id = j.at("env_id").get<std::string>();
    h.n_agents = j.at("n_agents").get<std::size_t>();
    h.horizon = j.at("horizon").get<std::size_t>();
    for (const auto& s : j.at("obs_spaces")) h.obs_spaces.push_back(space_from_json(s));
    for (const auto& s : j.at("act_spaces")) h.act_spaces.push_back(space_from_json(s));
    if (j.contains("seed") && !j.at("seed").is_null()) h.seed = j.at("seed").get<std::uint64_t>();
    h.metadata = j.value("metadata", json::object());
    record_count = j.at("record_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("bad trajectory header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedFile(std::string("bad trajectory header: ") + e.what());
  }
  check_header(h);
  const std::size_t rec = record_bytes(h);
  if (f.body.size() != record_count * rec) {
    throw MalformedFile("body holds " + std::to_string(f.body.size()) + " bytes; header implies " +
                        std::to_string(record_count) + " records of " + std::to_string(rec));
  }
  const std::size_t n = h.n_agents;
  bytes::Reader r(f.body);
  traj.steps.reserve(record_count);
  for (std::size_t k = 0; k < record_count; ++k) {
    JointStep js;
    js.t = static_cast<std::size_t>(r.get_u64());
    for (std::size_t i = 0; i < n; ++i) js.obs.push_back(get_obs(r, h.obs_spaces[i]));
    for (std::size_t i = 0; i < n; ++i) {
      js.actions.push_back(r.get_i64());
      if (!validate(h.act_spaces[i], Observation{js.actions.back()})) throw MalformedFile("action out of space");
    }
    for (std::size_t i = 0; i < n; ++i) js.rewards.push_back(r.get_f64());
    const std::uint8_t done = r.get_u8();
    if (done > 1) throw MalformedFile("done flag must be 0 or 1");
    js.done = done == 1;
    for (std::size_t i = 0; i < n; ++i) js.next_obs.push_back(get_obs(r, h.obs_spaces[i]));
    traj.steps.push_back(std::move(js));
  }
  check_episode_structure(traj.steps, h.horizon);
  return traj;
}

void save_trajectory(const Trajectory& trajectory, const fs::path& path) {
  write_file_atomic(path, encode_trajectory(trajectory));
}

Trajectory load_trajectory(const fs::path& path) { return decode_trajectory(read_file(path)); }

}  // namespace pnrl
