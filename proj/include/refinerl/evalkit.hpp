#pragma once

#include <optional>
#include <span>
#include <vector>

#include "refinerl/env.hpp"
#include "refinerl/policy.hpp"
#include "refinerl/refine.hpp"
#include "refinerl/rng.hpp"

namespace rfl {

// Measurement machinery: unbiased pass@k, reasoning / self-refinement /
// cross-refinement protocols, transition and length/marker metrics, and the
// training-free iterative baselines. Everything is deterministic given
// (generator, seed).

// Generation interface so protocols can be driven by a trained policy or by
// test stubs.
struct Generator {
    virtual ~Generator() = default;
    virtual Rollout generate(std::span<const Token> prompt, const DecodeConfig& decode,
                             Rng& rng) const = 0;
};

struct PolicyGenerator final : Generator {
    explicit PolicyGenerator(const PolicyParams& params) : params_(&params) {}
    Rollout generate(std::span<const Token> prompt, const DecodeConfig& decode,
                     Rng& rng) const override {
        return sample(*params_, prompt, decode, rng);
    }

  private:
    const PolicyParams* params_;
};

// 1 - C(n-c, k)/C(n, k) via the stable product form; exact for small
// integers. Throws std::domain_error outside 0 <= c <= n, 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct PassKTable {
    int n = 0;
    std::vector<int> k_list;
    std::vector<int> correct_counts;  // c_i per problem

    double problem_pass(size_t i, int k) const;
    double macro_pass(int k) const;  // each problem weighted equally
};

// Per problem: n independent samples scored by verify.
PassKTable eval_reasoning(const Generator& gen, const ProblemSet& problems, int n,
                          const DecodeConfig& decode, std::span<const int> k_list,
                          uint64_t seed);

struct SelfRefineResult {
    PassKTable base;
    PassKTable refined;
    // Flattened problem-major outcome pairs, aligned 1:1.
    std::vector<int> base_outcomes;
    std::vector<int> refined_outcomes;
    std::vector<Rollout> refined_rollouts;  // aligned with the outcome lists
};

// Per problem: n sampled bases, each wrapped in a refinement prompt and
// refined greedily under the same generator; the refined table is reported
// and base outcomes are kept for transition stats.
SelfRefineResult eval_self_refinement(const Generator& gen, const ProblemSet& problems,
                                      int n, const DecodeConfig& base_decode,
                                      std::span<const int> k_list, int context_budget,
                                      uint64_t seed);

// One greedy base from the reasoner, k_ref sampled refinements from the
// refiner; a problem counts as solved if any refinement verifies. Returns
// macro accuracy (one cross-model matrix cell).
double cross_refine(const Generator& reasoner, const Generator& refiner,
                    const ProblemSet& problems, int k_ref,
                    const DecodeConfig& refine_decode, int context_budget,
                    uint64_t seed);

struct TransitionStats {
    int64_t wrong_to_correct = 0;
    int64_t wrong_to_wrong = 0;
    int64_t correct_to_wrong = 0;
    int64_t correct_to_correct = 0;
    std::optional<double> fix_wrong;       // absent when no wrong bases
    std::optional<double> damage_correct;  // absent when no correct bases
};

TransitionStats transition_stats(std::span<const int> base_outcomes,
                                 std::span<const int> refined_outcomes);

enum class LengthFilter { all, base_correct_only };

struct LengthMarkerMetrics {
    std::optional<double> mean_length;    // generated tokens
    std::optional<double> ans_rate;       // fraction containing ANS
    std::optional<double> final_ans_rate; // fraction ending in an ANS+digits run
};

// base_outcomes is only consulted for the base_correct_only filter, where it
// must align with rollouts.
LengthMarkerMetrics length_marker_metrics(std::span<const Rollout> rollouts,
                                          LengthFilter filter,
                                          std::span<const int> base_outcomes = {});

// Iterated refinement within one branch: sample one base, then t_iters
// greedy refinement rounds, each wrapping only the latest solution. Only the
// final output is scored. t_iters = 1 is exactly the one-step refinement path.
Rollout self_refine_baseline(const Generator& gen, const Problem& problem, int t_iters,
                             const DecodeConfig& base_decode, int context_budget,
                             uint64_t seed);

// [USR] problem [MEM] memory_1 [MEM] memory_2 ... - no assistant turn, the
// base solution never appears.
std::vector<Token> reflexion_retry_prompt(const Problem& problem,
                                          std::span<const std::vector<Token>> memories);

// Sample a base, produce a refinement-prompted memory (kept, not scored),
// then retry the problem from scratch conditioned on the accumulated memory.
// Only the final retry is scored.
Rollout reflexion_baseline(const Generator& gen, const Problem& problem, int retries,
                           const DecodeConfig& base_decode, int context_budget,
                           uint64_t seed);

}  // namespace rfl
