#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pnrl/env.hpp"
#include "pnrl/policy.hpp"

namespace pnrl {

// Both file kinds share one framing, all integers little-endian:
//
//   magic      8 bytes   "PNRL-POL" | "PNRL-TRJ"
//   version    u32       1
//   hdr_len    u32
//   header     hdr_len bytes of compact JSON (sorted keys)
//   body       kind-specific, see below
//   crc        u32       CRC-32 of every preceding byte
//
// Policy body: u64 parameter count, then that many f64 (layout of
// PolicyParams::values). Trajectory body: header.record_count records of
//   u64 t | obs[n] | i64 action[n] | f64 reward[n] | u8 done | next_obs[n]
// with Discrete observations as i64 and Box observations as dim x f64.
//
// The checksum is verified before anything else is interpreted, so a
// damaged file always fails with ChecksumMismatch.
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kPolicyMagic = "PNRL-POL";
inline constexpr std::string_view kTrajectoryMagic = "PNRL-TRJ";
inline constexpr const char* kPolicyExtension = ".pnrlpol";
inline constexpr const char* kTrajectoryExtension = ".pnrltrj";

struct LoadedPolicy {
  Policy policy;
  nlohmann::json metadata;
};

std::string encode_policy(const Policy& policy, const nlohmann::json& metadata = nlohmann::json::object());
LoadedPolicy decode_policy(std::string_view bytes);

void save_policy(const Policy& policy, const std::filesystem::path& path,
                 const nlohmann::json& metadata = nlohmann::json::object());
LoadedPolicy load_policy(const std::filesystem::path& path);

// Throws ShapeMismatch unless `policy` fits the seat's spaces.
void check_fits(const Policy& policy, const ProjectedView& seat);

struct TrajectoryHeader {
  std::string env_id;
  std::size_t n_agents = 0;
  std::size_t horizon = 0;
  std::vector<SpaceSpec> obs_spaces;
  std::vector<SpaceSpec> act_spaces;
  std::optional<std::uint64_t> seed;  // reset seed of the first episode
  nlohmann::json metadata = nlohmann::json::object();

  static TrajectoryHeader for_env(const JointEnvSpec& spec, std::optional<std::uint64_t> seed = std::nullopt);
  bool operator==(const TrajectoryHeader&) const = default;
};

struct Trajectory {
  TrajectoryHeader header;
  std::vector<JointStep> steps;
  bool operator==(const Trajectory&) const = default;
};

std::string encode_trajectory(const Trajectory& trajectory);
Trajectory decode_trajectory(std::string_view bytes);

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

// Low-level framing, exposed for tools and tests.
std::string frame(std::string_view magic, const nlohmann::json& header, std::string_view body);
struct Frame {
  std::string magic;
  std::uint32_t version = 0;
  nlohmann::json header;
  std::string_view body;
};
// Verifies the checksum, then the magic and version.
Frame unframe(std::string_view bytes, std::string_view expected_magic);

// Writes via a temporary file in the same directory, then renames.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace pnrl
