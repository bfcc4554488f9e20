#include "refinerl/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rfl {

using ordered_json = nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (total_iterations < 1)
        throw std::invalid_argument("train: total_iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (checkpoint_every < 1)
        throw std::invalid_argument("train: checkpoint_every must be >= 1");
    update.validate();
    decode_train.validate();
}

namespace {

constexpr int kPhaseBase = 0;
constexpr int kPhaseRefine = 1;

const char* phase_name(int phase) { return phase == kPhaseBase ? "base" : "refine"; }

Group sample_group(const PolicyParams& params, const Problem& problem,
                   std::span<const Token> prompt, const TrainConfig& config, Rng& rng) {
    Group g;
    g.problem_ref = problem.id;
    g.prompt_tokens.assign(prompt.begin(), prompt.end());
    g.rollouts.reserve(size_t(config.update.group_size));
    g.rewards.reserve(size_t(config.update.group_size));
    for (int i = 0; i < config.update.group_size; ++i) {
        Rollout r = sample(params, prompt, config.decode_train, rng);
        r.reward = verify(r.tokens, problem);
        g.rewards.push_back(double(r.reward));
        g.rollouts.push_back(std::move(r));
    }
    return g;
}

void write_metrics_row(RunWriters& writers, int64_t step, int phase,
                       const UpdateStats& stats, double wall_ms) {
    if (!writers.metrics) return;
    writers.metrics->write(ordered_json{{"step", step},
                                        {"phase", phase_name(phase)},
                                        {"reward", stats.mean_reward},
                                        {"resp_len", stats.mean_resp_len},
                                        {"clip_frac", stats.clip_fraction},
                                        {"kl", stats.mean_kl},
                                        {"grad_norm", stats.grad_norm},
                                        {"wall_ms", wall_ms}});
}

void write_event(RunWriters& writers, const ordered_json& row) {
    if (writers.events) writers.events->write(row);
}

RefScorer make_ref_scorer(TrainState& state) {
    return [&state](std::span<const Token> prompt,
                    std::span<const Token> tokens) -> std::vector<double> {
        ++state.ref_accesses;
        return score(state.ref_params, prompt, tokens);
    };
}

PhaseOutcome run_phase(TrainState& state, int phase, std::vector<Group> groups,
                       const TrainConfig& config, RunWriters& writers,
                       const Stopwatch& watch) {
    Rng shuffle_rng = derive_rng(config.master_seed, "minibatch",
                                 uint64_t(state.step), uint64_t(phase));
    const RefScorer ref =
        config.update.kl_beta > 0.0 ? make_ref_scorer(state) : RefScorer{};

    PhaseOutcome out;
    out.stats = policy_update(state.params, std::move(groups), config.update, ref, shuffle_rng);
    if (!out.stats.skipped) {
        ++state.param_writes;
    } else {
        write_event(writers, ordered_json{{"step", state.step},
                                          {"phase", phase_name(phase)},
                                          {"event", "skipped_update"}});
    }
    out.wall_ms = watch.elapsed_ms();
    write_metrics_row(writers, state.step, phase, out.stats, out.wall_ms);
    return out;
}

}  // namespace

StepPairOutcome train_step_pair(TrainState& state, std::span<const Problem> batch,
                                const TrainConfig& config, RunWriters writers) {
    StepPairOutcome outcome;

    // Phase 1: reasoning on the plain prompts.
    Stopwatch watch;
    std::vector<Group> base_groups;
    base_groups.reserve(batch.size());
    for (size_t j = 0; j < batch.size(); ++j) {
        Rng gen = derive_rng(config.master_seed, "gen", uint64_t(state.step),
                             uint64_t(kPhaseBase), uint64_t(j));
        base_groups.push_back(
            sample_group(state.params, batch[j], batch[j].prompt, config, gen));
    }
    // Selection draws from these pre-update rollouts; the phase-1 update
    // below does not regenerate them.
    outcome.base = run_phase(state, kPhaseBase, base_groups, config, writers, watch);
    state.cum_wall_base_ms += outcome.base.wall_ms;

    if (config.mode == TrainMode::grpo_only) return outcome;

    // Phase 2: refinement of one randomly selected base solution per problem.
    watch.restart();
    std::vector<Group> refine_groups;
    refine_groups.reserve(batch.size());
    std::vector<int> trans_base, trans_refined;
    for (size_t j = 0; j < batch.size(); ++j) {
        Rng sel = derive_rng(config.master_seed, "select", uint64_t(state.step), uint64_t(j));
        const Rollout& base = select_base(base_groups[j], config.selection_mode, sel);
        const RefinePrompt rp = build_refine_prompt(batch[j], base, refine_instruction(),
                                                    config.context_budget);
        if (rp.truncated) {
            write_event(writers, ordered_json{{"step", state.step},
                                              {"phase", "refine"},
                                              {"event", "truncation"},
                                              {"problem", batch[j].id},
                                              {"base_len", base.tokens.size()},
                                              {"kept", rp.assistant_base.size()}});
        }
        ++outcome.refine_prompts_built;

        Rng gen = derive_rng(config.master_seed, "gen", uint64_t(state.step),
                             uint64_t(kPhaseRefine), uint64_t(j));
        Group g = sample_group(state.params, batch[j], rp.encoded, config, gen);
        for (const Rollout& r : g.rollouts) {
            trans_base.push_back(base.reward);
            trans_refined.push_back(r.reward);
        }
        refine_groups.push_back(std::move(g));
    }
    if (writers.transitions) {
        const TransitionStats t = transition_stats(trans_base, trans_refined);
        auto opt = [](const std::optional<double>& v) {
            return v ? ordered_json(*v) : ordered_json(nullptr);
        };
        writers.transitions->write(ordered_json{{"step", state.step},
                                                {"fix_wrong", opt(t.fix_wrong)},
                                                {"damage_correct", opt(t.damage_correct)}});
    }
    outcome.refine = run_phase(state, kPhaseRefine, std::move(refine_groups), config,
                               writers, watch);
    outcome.refine_ran = true;
    state.cum_wall_refine_ms += outcome.refine.wall_ms;
    return outcome;
}

namespace {

struct EvalRowResult {
    double base_pass1 = 0.0;
    double refined_pass1 = 0.0;
};

EvalRowResult run_eval(TrainState& state, const ProblemSet& eval_set,
                       const EvalSchedule& eval, const TrainConfig& config,
                       RunWriters& writers) {
    const PolicyGenerator gen(state.params);
    const uint64_t seed = derive_seed(config.master_seed, "eval", uint64_t(state.step));
    const SelfRefineResult res =
        eval_self_refinement(gen, eval_set, eval.n, eval.decode, eval.k_list,
                             config.context_budget, seed);
    const TransitionStats trans = transition_stats(res.base_outcomes, res.refined_outcomes);
    const LengthMarkerMetrics len = length_marker_metrics(
        res.refined_rollouts, LengthFilter::base_correct_only, res.base_outcomes);
    const LengthMarkerMetrics marker =
        length_marker_metrics(res.refined_rollouts, LengthFilter::all);

    EvalRowResult row;
    row.base_pass1 = res.base.macro_pass(1);
    row.refined_pass1 = res.refined.macro_pass(1);

    if (writers.eval) {
        auto opt = [](const std::optional<double>& v) {
            return v ? ordered_json(*v) : ordered_json(nullptr);
        };
        ordered_json base_passk = ordered_json::object();
        ordered_json refined_passk = ordered_json::object();
        for (int k : eval.k_list) {
            base_passk[std::to_string(k)] = res.base.macro_pass(k);
            refined_passk[std::to_string(k)] = res.refined.macro_pass(k);
        }
        writers.eval->write(ordered_json{{"step", state.step},
                                         {"n", eval.n},
                                         {"base_pass1", row.base_pass1},
                                         {"refined_pass1", row.refined_pass1},
                                         {"base_passk", base_passk},
                                         {"refined_passk", refined_passk},
                                         {"fix_wrong", opt(trans.fix_wrong)},
                                         {"damage_correct", opt(trans.damage_correct)},
                                         {"mean_len_correct_base", opt(len.mean_length)},
                                         {"ans_rate", opt(marker.ans_rate)},
                                         {"final_ans_rate", opt(marker.final_ans_rate)}});
    }
    return row;
}

}  // namespace

RunResult run_training(const ProblemSet& problems, const PolicyDims& dims,
                       const TrainConfig& config, const std::optional<EvalSchedule>& eval,
                       const std::filesystem::path& run_dir) {
    config.validate();
    if (eval) {
        eval->decode.validate();
        if (eval->eval_every < 1)
            throw std::invalid_argument("eval: eval_every must be >= 1");
        if (eval->problem_count < 1)
            throw std::invalid_argument("eval: problem_count must be >= 1");
    }
    if (problems.problems.size() < 2)
        throw std::runtime_error("run_training: need at least 2 problems");

    std::filesystem::create_directories(run_dir);
    JsonlWriter metrics(run_dir / "metrics.jsonl");
    JsonlWriter events(run_dir / "events.jsonl");
    JsonlWriter eval_log(run_dir / "eval.jsonl");
    RunWriters writers{&metrics, &events, &eval_log};

    TrainState state;
    state.master_seed = config.master_seed;
    Rng init_rng = derive_rng(config.master_seed, "init");
    state.params = init_params(dims, init_rng);
    state.ref_params = snapshot(state.params);

    ProblemSet eval_set;
    if (eval) {
        eval_set.spec = problems.spec;
        const size_t count =
            std::min(size_t(eval->problem_count), problems.problems.size());
        eval_set.problems.assign(problems.problems.begin(),
                                 problems.problems.begin() + ptrdiff_t(count));
    }

    RunResult result;
    result.run_dir = run_dir;
    result.metrics_path = run_dir / "metrics.jsonl";
    result.events_path = run_dir / "events.jsonl";
    result.eval_path = run_dir / "eval.jsonl";

    std::vector<size_t> order(problems.problems.size());
    std::iota(order.begin(), order.end(), size_t(0));
    size_t cursor = order.size();  // forces a shuffle before the first batch
    uint64_t epoch = 0;

    EvalRowResult last_eval{};
    bool evaluated = false;
    for (int step = 0; step < config.total_iterations; ++step) {
        // Partial tails of fewer than 2 problems are dropped at the epoch
        // boundary (advantages need at least 2 rollouts per group and tiny
        // batches can be emptied by filtering).
        if (order.size() - cursor < 2) {
            Rng shuffle = derive_rng(config.master_seed, "shuffle", epoch);
            for (size_t i = order.size(); i > 1; --i) {
                const size_t j = size_t(shuffle.uniform_int(0, int64_t(i) - 1));
                std::swap(order[i - 1], order[j]);
            }
            ++epoch;
            cursor = 0;
        }
        const size_t take = std::min(size_t(config.batch_size), order.size() - cursor);
        std::vector<Problem> batch;
        batch.reserve(take);
        for (size_t i = 0; i < take; ++i)
            batch.push_back(problems.problems[order[cursor + i]]);
        cursor += take;

        state.step = step;
        train_step_pair(state, batch, config, writers);

        if ((step + 1) % config.checkpoint_every == 0) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%06d.bin", step + 1);
            save_checkpoint(state.params, run_dir / name);
        }
        if (eval && ((step + 1) % eval->eval_every == 0 || step + 1 == config.total_iterations)) {
            last_eval = run_eval(state, eval_set, *eval, config, writers);
            evaluated = true;
        }
        result.steps_run = step + 1;
    }

    result.final_checkpoint = run_dir / "ckpt_final.bin";
    save_checkpoint(state.params, result.final_checkpoint);
    if (evaluated) {
        result.final_base_pass1 = last_eval.base_pass1;
        result.final_refined_pass1 = last_eval.refined_pass1;
    }
    metrics.flush();
    events.flush();
    eval_log.flush();
    return result;
}

}  // namespace rfl
