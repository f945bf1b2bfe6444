#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>

namespace dage::experiment {

/// One line of the metrics stream. Keys are written in declaration order;
/// wall_ms is the only field that varies between identical runs.
struct MetricsRecord {
  std::string type = "epoch";  // "epoch" or "final"
  std::string run_id;
  std::string phase;
  std::int64_t step = 0;
  int epoch = 0;
  std::map<std::string, double> losses;
  std::optional<double> validation_accuracy;
  std::optional<double> test_accuracy;
  double wall_ms = 0.0;

  std::string to_json() const;
};

}  // namespace dage::experiment
