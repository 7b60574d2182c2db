#include "swift/metrics.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "swift/error.hpp"

namespace swift {

double expected_speedup(double mean_generated, double alpha, double cost_coeff) {
  if (!(mean_generated >= 1.0)) throw Error("M must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw Error("alpha must lie in [0, 1]");
  if (!(cost_coeff > 0.0) || cost_coeff > 1.0) throw Error("c must lie in (0, 1]");
  const double denom = (mean_generated - 1.0) * cost_coeff + alpha;
  if (denom == 0.0) throw DivZero("expected_speedup denominator is zero");
  return mean_generated * alpha / denom;
}

MetricsReport metrics_from_records(const SessionTrace& trace, size_t first, size_t last,
                                   double skip_ratio, int64_t total_us, int64_t vanilla_us,
                                   const std::string& label) {
  MetricsReport r;
  r.label = label;
  r.skip_ratio = skip_ratio;
  r.cost_coeff = 1.0 - skip_ratio;
  int64_t draft_us = 0, verify_us = 0, optimize_us = 0;
  for (size_t i = first; i < last && i < trace.records.size(); ++i) {
    const TraceRecord& rec = trace.records[i];
    r.emitted += rec.emitted;
    r.target_forwards += 1;  // one target forward per verify call
    r.draft_steps += rec.spine_len;
    r.accepted += rec.accepted_draft;
    draft_us += rec.draft_us;
    verify_us += rec.verify_us;
    optimize_us += rec.optimize_us;
  }
  r.mean_generated = r.target_forwards == 0
                         ? 1.0
                         : static_cast<double>(r.emitted) / static_cast<double>(r.target_forwards);
  r.alpha = r.draft_steps == 0
                ? 0.0
                : static_cast<double>(r.accepted) / static_cast<double>(r.draft_steps);
  r.expected_speedup_val = (r.mean_generated == 1.0 && r.alpha == 0.0)
                               ? 1.0
                               : expected_speedup(r.mean_generated, r.alpha, r.cost_coeff);
  r.total_us = total_us;
  r.vanilla_us = vanilla_us;
  if (total_us > 0) {
    r.tokens_per_sec = static_cast<double>(r.emitted) / (static_cast<double>(total_us) * 1e-6);
    if (vanilla_us > 0)
      r.wall_speedup = static_cast<double>(vanilla_us) / static_cast<double>(total_us);
    r.shares.draft = static_cast<double>(draft_us) / static_cast<double>(total_us);
    r.shares.verify = static_cast<double>(verify_us) / static_cast<double>(total_us);
    r.shares.optimize = static_cast<double>(optimize_us) / static_cast<double>(total_us);
    r.shares.other = 1.0 - r.shares.draft - r.shares.verify - r.shares.optimize;
  }
  return r;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["label"] = report.label;
  j["M"] = report.mean_generated;
  j["alpha"] = report.alpha;
  j["r"] = report.skip_ratio;
  j["c"] = report.cost_coeff;
  j["expected_speedup"] = report.expected_speedup_val;
  j["wall_speedup"] = report.wall_speedup;
  j["tokens_per_sec"] = report.tokens_per_sec;
  j["shares"] = {{"draft", report.shares.draft},
                 {"verify", report.shares.verify},
                 {"optimize", report.shares.optimize},
                 {"other", report.shares.other}};
  j["counts"] = {{"emitted", report.emitted},
                 {"target_forwards", report.target_forwards},
                 {"draft_steps", report.draft_steps},
                 {"accepted", report.accepted}};
  j["timing_us"] = {{"total", report.total_us}, {"vanilla", report.vanilla_us}};
  return j.dump(2);
}

}  // namespace swift
