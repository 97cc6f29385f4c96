#pragma once

#include <cstdint>
#include <string>

#include "zoomctl/closed_loop.hpp"
#include "zoomctl/linear_system.hpp"

namespace zoomctl {

/// A batch run description loaded from JSON. The loader validates shape,
/// types and cross-field consistency against the shipped schema
/// (schemas/scenario.schema.json) and reports violations with their JSON
/// pointer, e.g. "/system/B".
struct Scenario {
  std::string name;
  int schema_version = 1;
  LinearSystem system{Matrix::Identity(1, 1) * 2.0, Matrix::Identity(1, 1),
                      {Matrix::Identity(1, 1)}};
  LoopConfig loop;
  std::uint64_t seed = 0;
  int trials = 1;
  std::vector<int> sensor_order;  // optional decompose/report order
  // Diagnostics knobs.
  int tail_fit_start = 3;
  double bounded_factor = 1.5;
  int dist_s1 = 0;  // 0 = horizon / 2
  int dist_s2 = 0;  // 0 = horizon

  static Scenario from_json_text(const std::string& text);
  static Scenario from_file(const std::string& path);

  /// Fully resolved parameter set for reproducibility records.
  std::string resolved_json() const;
};

}  // namespace zoomctl
