#include "pnrl/spaces.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pnrl {

SpaceSpec SpaceSpec::discrete(std::int64_t n) {
  SpaceSpec s;
  s.kind = SpaceKind::Discrete;
  s.n = n;
  s.check();
  return s;
}

SpaceSpec SpaceSpec::box(std::vector<double> low, std::vector<double> high) {
  SpaceSpec s;
  s.kind = SpaceKind::Box;
  s.n = 0;
  s.low = std::move(low);
  s.high = std::move(high);
  s.check();
  return s;
}

void SpaceSpec::check() const {
  if (kind == SpaceKind::Discrete) {
    if (n < 1) throw std::invalid_argument("Discrete space needs n >= 1");
    if (!low.empty() || !high.empty()) throw std::invalid_argument("Discrete space carries no bounds");
    return;
  }
  if (low.empty()) throw std::invalid_argument("Box space needs non-empty bounds");
  if (low.size() != high.size()) throw std::invalid_argument("Box bounds differ in length");
  for (std::size_t i = 0; i < low.size(); ++i) {
    if (std::isnan(low[i]) || std::isnan(high[i]) || !(low[i] <= high[i])) {
      throw std::invalid_argument("Box bound " + std::to_string(i) + " has low > high");
    }
  }
}

std::size_t SpaceSpec::feature_dim() const {
  return kind == SpaceKind::Discrete ? static_cast<std::size_t>(n) : low.size();
}

bool validate(const SpaceSpec& space, const Observation& value) {
  if (space.kind == SpaceKind::Discrete) {
    const auto* v = std::get_if<std::int64_t>(&value);
    return v != nullptr && *v >= 0 && *v < space.n;
  }
  const auto* v = std::get_if<std::vector<double>>(&value);
  if (v == nullptr || v->size() != space.low.size()) return false;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const double x = (*v)[i];
    if (!(x >= space.low[i] && x <= space.high[i])) return false;
  }
  return true;
}

std::vector<double> features(const SpaceSpec& space, const Observation& obs) {
  if (space.kind == SpaceKind::Discrete) {
    std::vector<double> out(static_cast<std::size_t>(space.n), 0.0);
    out[static_cast<std::size_t>(std::get<std::int64_t>(obs))] = 1.0;
    return out;
  }
  return std::get<std::vector<double>>(obs);
}

std::string to_string(const SpaceSpec& space) {
  std::ostringstream os;
  if (space.kind == SpaceKind::Discrete) {
    os << "Discrete(" << space.n << ")";
  } else {
    os << "Box(" << space.low.size() << ")";
  }
  return os.str();
}

std::string to_string(const Observation& obs) {
  if (const auto* v = std::get_if<std::int64_t>(&obs)) return std::to_string(*v);
  std::ostringstream os;
  os << "[";
  const auto& vec = std::get<std::vector<double>>(obs);
  for (std::size_t i = 0; i < vec.size(); ++i) os << (i ? ", " : "") << vec[i];
  os << "]";
  return os.str();
}

nlohmann::json to_json(const SpaceSpec& space) {
  if (space.kind == SpaceKind::Discrete) return {{"kind", "discrete"}, {"n", space.n}};
  return {{"kind", "box"}, {"low", space.low}, {"high", space.high}};
}

SpaceSpec space_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") return SpaceSpec::discrete(j.at("n").get<std::int64_t>());
  if (kind == "box") {
    return SpaceSpec::box(j.at("low").get<std::vector<double>>(), j.at("high").get<std::vector<double>>());
  }
  throw std::invalid_argument("unknown space kind '" + kind + "'");
}

}  // namespace pnrl
