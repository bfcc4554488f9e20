#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "refinerl/policy.hpp"
#include "refinerl/rng.hpp"

namespace rfl {

// Group-relative policy optimization: group-normalized advantages,
// token-level importance ratios, clipped surrogate, optional k3 KL penalty,
// and the minibatched plain-gradient-ascent update.

enum class Variant { grpo, dr_grpo, dapo };

// seq_mean_then_group_mean: per-sequence token mean, then mean across
// rollouts (each sequence weighs equally). token_mean: pooled mean over all
// tokens in the minibatch (each token weighs equally).
enum class Aggregation { token_mean, seq_mean_then_group_mean };

struct UpdateConfig {
    Variant variant = Variant::grpo;
    int group_size = 8;
    double learning_rate = 0.5;
    double eps_low = 0.2;
    double eps_high = 0.2;
    double kl_beta = 0.0;
    int minibatch_size = 4;  // groups per gradient step; remainder chunk is used
    Aggregation aggregation = Aggregation::seq_mean_then_group_mean;
    double std_epsilon = 1e-6;
    bool dynamic_filter = false;

    void validate() const;
};

struct Group {
    int64_t problem_ref = 0;
    std::vector<Token> prompt_tokens;  // exact conditioning sequence
    std::vector<Rollout> rollouts;
    std::vector<double> rewards;
};

// grpo/dapo: (r - mean) / max(popstd, std_epsilon); dr_grpo: r - mean.
// All-equal rewards give exactly zero advantages in every variant.
// Throws on G < 2.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       const UpdateConfig& config);

// exp(new - old), elementwise; throws on length mismatch.
std::vector<double> importance_ratios(std::span<const double> new_logprobs,
                                      std::span<const double> old_logprobs);

struct SurrogateTerms {
    std::vector<double> values;        // min(rho*A, clip(rho)*A)
    std::vector<double> grad_weights;  // d value / d new_logprob (rho*A or 0)
    int clipped = 0;                   // tokens where the clipped branch won strictly
};
SurrogateTerms clipped_surrogate(std::span<const double> ratios, double advantage,
                                 double eps_low, double eps_high);

struct KlTerms {
    std::vector<double> values;        // k3 = exp(ref-new) - (ref-new) - 1 >= 0
    std::vector<double> grad_weights;  // d k3 / d new_logprob = 1 - exp(ref-new)
};
KlTerms kl_penalty(std::span<const double> new_logprobs,
                   std::span<const double> ref_logprobs);

// Drops groups whose rewards are all equal when enabled; identity otherwise.
std::vector<Group> dynamic_filter(std::vector<Group> groups, bool enabled);

// Reference-policy scoring, injected so the caller can count accesses and so
// beta = 0 provably never touches the reference.
using RefScorer = std::function<std::vector<double>(std::span<const Token> prompt,
                                                    std::span<const Token> tokens)>;

struct Objective {
    double value = 0.0;  // aggregated surrogate - beta * aggregated KL
    PolicyParams grad;
    double sum_ratio = 0.0;
    double sum_kl = 0.0;
    int64_t clipped_tokens = 0;
    int64_t tokens = 0;
    bool all_zero_advantage = true;
};

// The scalar objective and its exact gradient for one minibatch of groups,
// rescoring every rollout under `params`. This is the quantity the finite
// difference acceptance check drives.
Objective compute_objective(const PolicyParams& params, std::span<const Group> groups,
                            const UpdateConfig& config, const RefScorer& ref_scorer);

struct UpdateStats {
    bool skipped = false;  // all groups filtered; parameters untouched
    int groups_in = 0;
    int groups_used = 0;
    int minibatch_steps = 0;
    double mean_reward = 0.0;    // over all incoming rollouts, pre-filter
    double mean_resp_len = 0.0;  // generated tokens, pre-filter
    double mean_ratio = 1.0;
    double clip_fraction = 0.0;
    double mean_kl = 0.0;
    double grad_norm = 0.0;  // mean L2 over minibatch steps
};

// One gradient epoch: shuffle groups, split into minibatches, one plain
// gradient-ascent step per minibatch. Rollout logprobs must be the ones
// recorded under the snapshot that generated them.
UpdateStats policy_update(PolicyParams& live, std::vector<Group> groups,
                          const UpdateConfig& config, const RefScorer& ref_scorer,
                          Rng& shuffle_rng);

}  // namespace rfl
