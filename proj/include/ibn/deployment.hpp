#pragma once

#include <string>
#include <vector>

#include "ibn/domain.hpp"

namespace ibn {

enum class InstructionAction { kCreateNode, kCreateLink, kSetWeight };

std::string to_string(InstructionAction a);

// args per action:
//   CREATE_NODE {"node_id", "role", "domain_id"}
//   CREATE_LINK {"endpoint_a", "endpoint_b", "attrs"}
//   SET_WEIGHT  {"link_id", "weight"}
struct Instruction {
  InstructionAction action = InstructionAction::kCreateNode;
  json args = json::object();
};

struct DeploymentDocument {
  std::string task_id;
  WeightedTopology topology;
  std::vector<Instruction> instructions;
  std::string emitted_at;
};

void to_json(json& j, const Instruction& v);
void from_json(const json& j, Instruction& v);
void to_json(json& j, const DeploymentDocument& v);
void from_json(const json& j, DeploymentDocument& v);

}  // namespace ibn
