#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace pnrl {

enum class SpaceKind { Discrete, Box };

// Observation or action space of one agent seat.
struct SpaceSpec {
  SpaceKind kind = SpaceKind::Discrete;
  std::int64_t n = 1;        // Discrete only
  std::vector<double> low;   // Box only
  std::vector<double> high;  // Box only

  static SpaceSpec discrete(std::int64_t n);
  static SpaceSpec box(std::vector<double> low, std::vector<double> high);

  // Throws std::invalid_argument when the invariants do not hold.
  void check() const;

  // Width of the real-valued feature vector fed to a network:
  // one-hot width for Discrete, vector length for Box.
  std::size_t feature_dim() const;

  bool operator==(const SpaceSpec&) const = default;
};

using Observation = std::variant<std::int64_t, std::vector<double>>;
using Action = std::int64_t;

bool validate(const SpaceSpec& space, const Observation& value);

// Real-valued encoding of an observation (one-hot for Discrete).
std::vector<double> features(const SpaceSpec& space, const Observation& obs);

std::string to_string(const SpaceSpec& space);
std::string to_string(const Observation& obs);

nlohmann::json to_json(const SpaceSpec& space);
SpaceSpec space_from_json(const nlohmann::json& j);

}  // namespace pnrl
