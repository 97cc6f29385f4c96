#pragma once

#include <span>
#include <string>

#include "zoomctl/closed_loop.hpp"

namespace zoomctl {

/// One JSON record per sampled step and trial: {trial, s, x, delta, q, b,
/// zoomed}. q is a scalar for single-sensor runs and an array with one
/// symbol per sensor channel otherwise. Output bytes are deterministic for
/// a given report list.
std::string run_records_jsonl(std::span<const RunReport> reports);

/// Same records as CSV: header row then one line per step. Floats are
/// emitted with round-trip precision.
std::string run_records_csv(std::span<const RunReport> reports);

/// Writes the given bytes; parent directories must exist.
void write_text_file(const std::string& path, const std::string& content);

}  // namespace zoomctl
