#include "dage/metrics.hpp"

#include <json.hpp>

namespace dage::experiment {

std::string MetricsRecord::to_json() const {
  nlohmann::ordered_json j;
  j["type"] = type;
  j["run_id"] = run_id;
  j["phase"] = phase;
  j["step"] = step;
  j["epoch"] = epoch;
  nlohmann::ordered_json l = nlohmann::ordered_json::object();
  for (const auto& [k, v] : losses) l[k] = v;
  j["losses"] = l;
  j["validation_accuracy"] = validation_accuracy ? nlohmann::ordered_json(*validation_accuracy)
                                                 : nlohmann::ordered_json(nullptr);
  j["test_accuracy"] =
      test_accuracy ? nlohmann::ordered_json(*test_accuracy) : nlohmann::ordered_json(nullptr);
  j["wall_ms"] = wall_ms;
  return j.dump();
}

}  // namespace dage::experiment
