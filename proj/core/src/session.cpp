#include "swift/session.hpp"

#include <chrono>

#include "swift/error.hpp"

namespace swift {

namespace {

int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void validate_request(const ModelBundle& m, const GenerationRequest& req, size_t overhead) {
  if (req.max_new_tokens < 1) throw BadRequest("max_new_tokens must be >= 1");
  if (req.prompt.empty()) throw BadRequest("prompt must not be empty");
  for (token_t t : req.prompt)
    if (t < 0 || t >= m.config.vocab_size) throw BadRequest("prompt token outside vocab");
  if (req.prompt.size() + static_cast<size_t>(req.max_new_tokens) + overhead >
      static_cast<size_t>(m.config.max_seq))
    throw BadRequest("prompt + max_new_tokens does not fit max_seq");
  if (req.mode == DecodeMode::kSample &&
      (!(req.temperature > 0.0) || !(req.top_p > 0.0) || req.top_p > 1.0))
    throw BadRequest("sampling needs temperature > 0 and top_p in (0, 1]");
}

// Worst-case scratch rows held at once: the pending row plus a fully
// expanded draft tree (every step carrying the largest candidate set).
size_t scratch_overhang(int max_draft) { return 1 + 10 * static_cast<size_t>(max_draft) + 8; }

}  // namespace

Session::Session(const ModelBundle& m, SessionConfig cfg)
    : model_(m),
      cfg_(cfg),
      cache_(m.config, scratch_overhang(cfg.max_draft)),
      opt_(make_optimizer_state(m.config.n_sublayers(), cfg.optimizer)),
      sample_rng_(Rng(cfg.seed).fork(1)),
      opt_rng_(Rng(cfg.seed).fork(2)) {
  m.validate();
}

bool Session::context_ready(ContextBuffer& ctx) const {
  const size_t gamma = static_cast<size_t>(opt_.cfg.gamma);
  if (generated_in_instance_ < gamma) return false;
  if (history_.size() < gamma + 1) return false;
  const size_t n = history_.size();
  ctx.inputs.assign(history_.begin() + (n - gamma - 1), history_.end() - 1);
  ctx.targets.assign(history_.begin() + (n - gamma), history_.end());
  return true;
}

void Session::note_phase(Phase from, Phase to, const std::string& reason, double r_before,
                         double r_after) {
  trace_.phase_events.push_back({instance_, round_, from, to, reason, r_before, r_after});
}

GenerationResult Session::run(const GenerationRequest& req) {
  validate_request(model_, req, 1);
  instance_ += 1;
  generated_in_instance_ = 0;
  cache_.reset();
  history_ = req.prompt;
  pending_ = history_.back();

  // Re-enter context accumulation at every instance until termination.
  if (!cfg_.optimizer.force_zero_mask && opt_.phase == Phase::kOptimizing) {
    note_phase(opt_.phase, Phase::kContextAccumulation, "instance_start", opt_.skip_ratio,
               opt_.skip_ratio);
    opt_.phase = Phase::kContextAccumulation;
  }

  if (history_.size() > 1) {
    const std::span<const token_t> prefix(history_.data(), history_.size() - 1);
    forward(model_, cache_, prefix, LayerMask::zeros(model_.config.n_sublayers()),
            AttnSpec::causal(), true);
  }

  GenerationResult result;
  result.first_record = trace_.records.size();
  size_t inst_draft_steps = 0;
  size_t inst_accepted = 0;
  size_t rounds = 0;
  const DraftParams draft_params{req.mode, cfg_.epsilon, cfg_.max_draft, req.temperature,
                                 req.top_p};

  while (result.tokens.size() < static_cast<size_t>(req.max_new_tokens)) {
    round_ += 1;
    rounds += 1;
    TraceRecord rec;
    rec.instance = instance_;
    rec.round = round_;

    if (!cfg_.optimizer.force_zero_mask && opt_.phase != Phase::kAccelerating) {
      ContextBuffer ctx;
      const bool ready = context_ready(ctx);
      if (ready && opt_.phase == Phase::kContextAccumulation) {
        note_phase(opt_.phase, Phase::kOptimizing, "context_ready", opt_.skip_ratio,
                   opt_.skip_ratio);
        opt_.phase = Phase::kOptimizing;
        const int64_t t0 = now_us();
        score_baseline(opt_, model_, cache_, ctx);
        rec.optimize_us += now_us() - t0;
      }
      if (ready && opt_.phase == Phase::kOptimizing) {
        const int64_t t0 = now_us();
        optimize_step(opt_, model_, cache_, ctx, opt_rng_);
        rec.optimize_us += now_us() - t0;
        if (opt_.phase == Phase::kAccelerating)
          note_phase(Phase::kOptimizing, Phase::kAccelerating, "termination", opt_.skip_ratio,
                     opt_.skip_ratio);
      }
    }

    const LayerMask& mask = opt_.best_mask;
    rec.phase = opt_.phase;
    rec.mask_hash = mask.hash();
    rec.mask_popcount = mask.popcount();
    trace_.mask_registry.emplace(rec.mask_hash, mask.bits);

    int64_t t0 = now_us();
    const DraftTree tree = draft(model_, cache_, mask, pending_, draft_params, &sample_rng_);
    rec.draft_us = now_us() - t0;

    VerifyLimits limits;
    limits.max_emit = static_cast<size_t>(req.max_new_tokens) - result.tokens.size();
    limits.stop = &req.stop_tokens;
    t0 = now_us();
    const VerifyOutcome out =
        req.mode == DecodeMode::kGreedy
            ? verify_greedy(model_, cache_, tree, pending_, limits)
            : verify_sampling(model_, cache_, tree, pending_, req.temperature, req.top_p,
                              sample_rng_, limits);
    rec.verify_us = now_us() - t0;

    history_.insert(history_.end(), out.accepted_tokens.begin(), out.accepted_tokens.end());
    result.tokens.insert(result.tokens.end(), out.accepted_tokens.begin(),
                         out.accepted_tokens.end());
    pending_ = history_.back();
    generated_in_instance_ += out.accepted_tokens.size();
    inst_draft_steps += out.draft_spine_len;
    inst_accepted += out.accepted_draft_count;

    rec.spine_len = out.draft_spine_len;
    rec.linear_len = tree.linear_len();
    rec.accepted_draft = out.accepted_draft_count;
    rec.emitted = out.accepted_tokens.size();
    trace_.records.push_back(rec);

    bool hit_stop = false;
    for (token_t t : out.accepted_tokens) hit_stop |= req.stop_tokens.count(t) > 0;
    if (hit_stop) break;
  }
  result.last_record = trace_.records.size();

  InstanceStats stats;
  stats.instance = instance_;
  stats.rounds = rounds;
  stats.emitted = result.tokens.size();
  stats.draft_steps = inst_draft_steps;
  stats.accepted = inst_accepted;
  stats.alpha = inst_draft_steps == 0
                    ? 1.0
                    : static_cast<double>(inst_accepted) / static_cast<double>(inst_draft_steps);
  stats.end_phase = opt_.phase;
  trace_.instances.push_back(stats);

  if (opt_.phase == Phase::kAccelerating && inst_draft_steps > 0) {
    const double r_before = opt_.skip_ratio;
    if (check_alpha_tolerance(opt_, stats.alpha))
      note_phase(Phase::kAccelerating, Phase::kOptimizing, "alpha_below_tolerance", r_before,
                 opt_.skip_ratio);
  }
  return result;
}

std::vector<token_t> generate_vanilla(const ModelBundle& m, const GenerationRequest& req,
                                      Rng& rng) {
  validate_request(m, req, 0);
  KVCache cache(m.config);
  const LayerMask zeros = LayerMask::zeros(m.config.n_sublayers());
  std::vector<token_t> history = req.prompt;
  if (history.size() > 1) {
    const std::span<const token_t> prefix(history.data(), history.size() - 1);
    forward(m, cache, prefix, zeros, AttnSpec::causal(), true);
  }

  std::vector<token_t> out;
  token_t pending = history.back();
  while (out.size() < static_cast<size_t>(req.max_new_tokens)) {
    const LogitsBlock lb =
        forward(m, cache, std::span<const token_t>(&pending, 1), zeros, AttnSpec::causal(), true);
    token_t next;
    if (req.mode == DecodeMode::kGreedy) {
      next = argmax_token(lb.row(0));
    } else {
      const auto dist = top_p_filter(softmax_row(lb.row(0), req.temperature), req.top_p);
      next = sample_from(dist, rng.uniform());
    }
    out.push_back(next);
    pending = next;
    if (req.stop_tokens.count(next)) break;
  }
  return out;
}

}  // namespace swift
