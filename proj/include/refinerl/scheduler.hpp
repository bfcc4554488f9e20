#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "refinerl/env.hpp"
#include "refinerl/evalkit.hpp"
#include "refinerl/metrics.hpp"
#include "refinerl/policy.hpp"
#include "refinerl/refine.hpp"
#include "refinerl/rlcore.hpp"

namespace rfl {

// Two-phase training loop: a reasoning update on fresh rollouts, then a
// refinement update on the model's own (randomly selected) base solutions,
// with the same binary verifier reward in both phases. grpo_only runs only
// the first phase, for ablations.

enum class TrainMode { two_phase, grpo_only };

struct TrainConfig {
    TrainMode mode = TrainMode::two_phase;
    int total_iterations = 300;  // step pairs
    int batch_size = 16;
    UpdateConfig update;
    DecodeConfig decode_train;  // temperature 1.0 during training
    SelectionMode selection_mode = SelectionMode::random;
    int checkpoint_every = 100;
    int context_budget = 0;  // <= 0: unlimited; refinement prompts are elided to fit
    uint64_t master_seed = 1;

    void validate() const;
};

struct EvalSchedule {
    int n = 8;
    std::vector<int> k_list = {1, 4};
    int eval_every = 20;
    int problem_count = 24;  // evaluated on the first problems of the training set
    DecodeConfig decode;     // base-solution sampling settings at eval time
};

struct TrainState {
    PolicyParams params;
    PolicyParams ref_params;  // frozen at start, only read when kl_beta > 0
    int64_t step = 0;
    uint64_t master_seed = 0;
    double cum_wall_base_ms = 0.0;
    double cum_wall_refine_ms = 0.0;
    int64_t param_writes = 0;
    int64_t ref_accesses = 0;
};

struct RunWriters {
    JsonlWriter* metrics = nullptr;
    JsonlWriter* events = nullptr;
    JsonlWriter* eval = nullptr;
    // Refinement-phase transition rates measured on the training rollouts;
    // only two_phase runs produce rows here.
    JsonlWriter* transitions = nullptr;
};

struct PhaseOutcome {
    UpdateStats stats;
    double wall_ms = 0.0;
};

struct StepPairOutcome {
    PhaseOutcome base;
    PhaseOutcome refine;
    bool refine_ran = false;
    int refine_prompts_built = 0;
};

// One training iteration over a batch of problems. Phase 1 samples G
// rollouts per problem from the live params and updates; Phase 2 (two_phase
// mode) selects one base per problem from the Phase 1 rollouts, builds the
// refinement prompts, samples G refinements from the updated params, and
// updates again. Skipped updates propagate through stats, never as errors.
StepPairOutcome train_step_pair(TrainState& state, std::span<const Problem> batch,
                                const TrainConfig& config, RunWriters writers = {});

struct RunResult {
    std::filesystem::path run_dir;
    std::filesystem::path metrics_path;
    std::filesystem::path events_path;
    std::filesystem::path eval_path;
    std::filesystem::path final_checkpoint;
    int steps_run = 0;
    double final_base_pass1 = 0.0;
    double final_refined_pass1 = 0.0;
};

// Full loop: epoch shuffling, step pairs, periodic checkpoints, periodic
// evaluation on the training set prefix, line-delimited logs. Byte-identical
// logs across runs with the same build/config/seed, wall-clock fields aside.
RunResult run_training(const ProblemSet& problems, const PolicyDims& dims,
                       const TrainConfig& config, const std::optional<EvalSchedule>& eval,
                       const std::filesystem::path& run_dir);

}  // namespace rfl
