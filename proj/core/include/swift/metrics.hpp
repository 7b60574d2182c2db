#pragma once

#include <string>

#include "swift/session.hpp"

namespace swift {

struct StageShares {
  double draft = 0.0;
  double verify = 0.0;
  double optimize = 0.0;
  double other = 0.0;
};

struct MetricsReport {
  std::string label;
  double mean_generated = 1.0;  // M: tokens emitted per target forward
  double alpha = 0.0;           // accepted draft tokens / draft steps
  double skip_ratio = 0.0;      // r
  double cost_coeff = 1.0;      // c = 1 - r
  double expected_speedup_val = 1.0;
  double wall_speedup = 0.0;
  double tokens_per_sec = 0.0;
  StageShares shares;
  size_t emitted = 0;
  size_t target_forwards = 0;
  size_t draft_steps = 0;
  size_t accepted = 0;
  int64_t total_us = 0;
  int64_t vanilla_us = 0;
};

// Expected wall-time speedup of the acceleration phase:
// M * alpha / ((M - 1) * c + alpha), with c the draft/target cost ratio.
double expected_speedup(double mean_generated, double alpha, double cost_coeff);

// Independent reduction of per-verify-call records; [first, last) indexes
// into trace.records.
MetricsReport metrics_from_records(const SessionTrace& trace, size_t first, size_t last,
                                   double skip_ratio, int64_t total_us, int64_t vanilla_us,
                                   const std::string& label);

std::string report_to_json(const MetricsReport& report);

}  // namespace swift
