#include "ibn/deployment.hpp"

#include "ibn/error.hpp"

namespace ibn {

std::string to_string(InstructionAction a) {
  switch (a) {
    case InstructionAction::kCreateNode: return "CREATE_NODE";
    case InstructionAction::kCreateLink: return "CREATE_LINK";
    case InstructionAction::kSetWeight: return "SET_WEIGHT";
  }
  return "CREATE_NODE";
}

void to_json(json& j, const Instruction& v) { j = json{{"action", to_string(v.action)}, {"args", v.args}}; }

void from_json(const json& j, Instruction& v) {
  const auto action = j.at("action").get<std::string>();
  if (action == "CREATE_NODE") {
    v.action = InstructionAction::kCreateNode;
  } else if (action == "CREATE_LINK") {
    v.action = InstructionAction::kCreateLink;
  } else if (action == "SET_WEIGHT") {
    v.action = InstructionAction::kSetWeight;
  } else {
    throw Error(errc::kBadRequest, "unknown instruction action '" + action + "'");
  }
  v.args = j.at("args");
}

void to_json(json& j, const DeploymentDocument& v) {
  j = json{{"task_id", v.task_id},
           {"topology", v.topology},
           {"instructions", v.instructions},
           {"emitted_at", v.emitted_at}};
}

void from_json(const json& j, DeploymentDocument& v) {
  v.task_id = j.at("task_id").get<std::string>();
  v.topology = j.at("topology").get<WeightedTopology>();
  v.instructions = j.at("instructions").get<std::vector<Instruction>>();
  v.emitted_at = j.value("emitted_at", std::string{});
}

}  // namespace ibn
