#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "swift/optimizer.hpp"

namespace swift {

struct GenerationRequest {
  std::vector<token_t> prompt;
  int max_new_tokens = 0;
  DecodeMode mode = DecodeMode::kGreedy;
  double temperature = 1.0;
  double top_p = 1.0;
  std::set<token_t> stop_tokens;
};

struct SessionConfig {
  double epsilon = 0.3;  // early-stop threshold; the value is a free knob
  int max_draft = 25;    // N_D
  OptimizerConfig optimizer;
  uint64_t seed = 0;
};

struct TraceRecord {
  size_t instance = 0;
  size_t round = 0;
  Phase phase = Phase::kContextAccumulation;
  uint64_t mask_hash = 0;
  size_t mask_popcount = 0;
  size_t spine_len = 0;
  size_t linear_len = 0;
  size_t accepted_draft = 0;
  size_t emitted = 0;
  int64_t draft_us = 0;
  int64_t verify_us = 0;
  int64_t optimize_us = 0;
};

struct PhaseEvent {
  size_t instance = 0;
  size_t round = 0;
  Phase from = Phase::kContextAccumulation;
  Phase to = Phase::kContextAccumulation;
  std::string reason;
  double ratio_before = 0.0;
  double ratio_after = 0.0;
};

struct InstanceStats {
  size_t instance = 0;
  size_t rounds = 0;
  size_t emitted = 0;
  size_t draft_steps = 0;
  size_t accepted = 0;
  double alpha = 0.0;
  Phase end_phase = Phase::kContextAccumulation;
};

struct SessionTrace {
  std::vector<TraceRecord> records;
  std::vector<InstanceStats> instances;
  std::vector<PhaseEvent> phase_events;
  std::map<uint64_t, std::vector<uint8_t>> mask_registry;

  size_t total_emitted() const {
    size_t n = 0;
    for (const auto& r : records) n += r.emitted;
    return n;
  }
};

struct GenerationResult {
  std::vector<token_t> tokens;  // newly generated tokens only
  size_t first_record = 0;      // trace record range covered by this instance
  size_t last_record = 0;
};

// One decode stream. Each run() call is one instance with a fresh prompt and
// cache; the optimizer state, trace, and rng streams persist across
// instances. Decode loop per round: optional optimize step, draft with the
// current best mask, lossless verify, commit.
class Session {
 public:
  Session(const ModelBundle& m, SessionConfig cfg);

  GenerationResult run(const GenerationRequest& req);

  const SessionTrace& trace() const { return trace_; }
  const OptimizerState& optimizer_state() const { return opt_; }
  const std::vector<token_t>& history() const { return history_; }

 private:
  bool context_ready(ContextBuffer& ctx) const;
  void note_phase(Phase from, Phase to, const std::string& reason, double r_before,
                  double r_after);

  const ModelBundle& model_;
  SessionConfig cfg_;
  KVCache cache_;
  OptimizerState opt_;
  Rng sample_rng_;
  Rng opt_rng_;
  std::vector<token_t> history_;
  token_t pending_ = 0;
  size_t generated_in_instance_ = 0;
  size_t instance_ = 0;
  size_t round_ = 0;
  SessionTrace trace_;
};

// Plain token-by-token decoding with the full model: the losslessness oracle
// and the wall-clock baseline. Sampling mode consumes one rng draw per token.
std::vector<token_t> generate_vanilla(const ModelBundle& m, const GenerationRequest& req,
                                      Rng& rng);

}  // namespace swift
