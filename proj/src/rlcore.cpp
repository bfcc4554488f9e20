#include "refinerl/rlcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rfl {

void UpdateConfig::validate() const {
    if (group_size < 2) throw std::invalid_argument("update: group_size must be >= 2");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("update: learning_rate must be > 0");
    if (!(eps_low > 0.0 && eps_low < 1.0))
        throw std::invalid_argument("update: eps_low must be in (0,1)");
    if (!(eps_high > 0.0 && eps_high < 1.0))
        throw std::invalid_argument("update: eps_high must be in (0,1)");
    if (kl_beta < 0.0) throw std::invalid_argument("update: kl_beta must be >= 0");
    if (minibatch_size < 1) throw std::invalid_argument("update: minibatch_size must be >= 1");
    if (!(std_epsilon > 0.0)) throw std::invalid_argument("update: std_epsilon must be > 0");
}

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       const UpdateConfig& config) {
    const size_t g = rewards.size();
    if (g < 2) throw std::invalid_argument("compute_advantages: need G >= 2 rewards");

    const auto [mn, mx] = std::minmax_element(rewards.begin(), rewards.end());
    if (*mn == *mx) return std::vector<double>(g, 0.0);

    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= double(g);

    std::vector<double> adv(g);
    for (size_t i = 0; i < g; ++i) adv[i] = rewards[i] - mean;
    if (config.variant == Variant::dr_grpo) return adv;

    double var = 0.0;
    for (double a : adv) var += a * a;
    const double sd = std::sqrt(var / double(g));  // population std
    const double denom = std::max(sd, config.std_epsilon);
    for (double& a : adv) a /= denom;
    return adv;
}

std::vector<double> importance_ratios(std::span<const double> new_logprobs,
                                      std::span<const double> old_logprobs) {
    if (new_logprobs.size() != old_logprobs.size())
        throw std::invalid_argument("importance_ratios: length mismatch");
    std::vector<double> rho(new_logprobs.size());
    for (size_t i = 0; i < rho.size(); ++i)
        rho[i] = std::exp(new_logprobs[i] - old_logprobs[i]);
    return rho;
}

SurrogateTerms clipped_surrogate(std::span<const double> ratios, double advantage,
                                 double eps_low, double eps_high) {
    SurrogateTerms out;
    out.values.resize(ratios.size());
    out.grad_weights.resize(ratios.size());
    for (size_t t = 0; t < ratios.size(); ++t) {
        const double rho = ratios[t];
        const double unclipped = rho * advantage;
        const double clipped =
            std::clamp(rho, 1.0 - eps_low, 1.0 + eps_high) * advantage;
        if (unclipped <= clipped) {
            // Ties select the unclipped branch, so the gradient flows.
            out.values[t] = unclipped;
            out.grad_weights[t] = unclipped;  // d(rho*A)/d new_logprob = rho*A
        } else {
            out.values[t] = clipped;
            out.grad_weights[t] = 0.0;
            ++out.clipped;
        }
    }
    return out;
}

KlTerms kl_penalty(std::span<const double> new_logprobs,
                   std::span<const double> ref_logprobs) {
    if (new_logprobs.size() != ref_logprobs.size())
        throw std::invalid_argument("kl_penalty: length mismatch");
    KlTerms out;
    out.values.resize(new_logprobs.size());
    out.grad_weights.resize(new_logprobs.size());
    for (size_t t = 0; t < new_logprobs.size(); ++t) {
        const double d = ref_logprobs[t] - new_logprobs[t];
        const double e = std::exp(d);
        out.values[t] = e - d - 1.0;
        out.grad_weights[t] = 1.0 - e;
    }
    return out;
}

std::vector<Group> dynamic_filter(std::vector<Group> groups, bool enabled) {
    if (!enabled) return groups;
    std::vector<Group> kept;
    kept.reserve(groups.size());
    for (auto& g : groups) {
        const auto [mn, mx] = std::minmax_element(g.rewards.begin(), g.rewards.end());
        if (g.rewards.empty() || *mn != *mx) kept.push_back(std::move(g));
    }
    return kept;
}

Objective compute_objective(const PolicyParams& params, std::span<const Group> groups,
                            const UpdateConfig& config, const RefScorer& ref_scorer) {
    if (config.kl_beta > 0.0 && !ref_scorer)
        throw std::invalid_argument("compute_objective: kl_beta > 0 needs a reference scorer");

    Objective obj;
    obj.grad = params;
    obj.grad.fill_zero();

    // Aggregation denominators over the whole minibatch.
    int64_t n_rollouts = 0;
    int64_t n_tokens = 0;
    for (const auto& g : groups) {
        for (const auto& r : g.rollouts) {
            if (r.tokens.empty()) continue;
            ++n_rollouts;
            n_tokens += int64_t(r.tokens.size());
        }
    }
    if (n_rollouts == 0) return obj;

    std::vector<double> coeffs;
    for (const auto& g : groups) {
        const auto advantages = compute_advantages(g.rewards, config);
        for (size_t i = 0; i < g.rollouts.size(); ++i) {
            const Rollout& r = g.rollouts[i];
            if (r.tokens.empty()) continue;
            const double adv = advantages[i];
            if (adv != 0.0) obj.all_zero_advantage = false;

            const double agg_w =
                config.aggregation == Aggregation::seq_mean_then_group_mean
                    ? 1.0 / (double(n_rollouts) * double(r.tokens.size()))
                    : 1.0 / double(n_tokens);

            const auto new_lp = score(params, g.prompt_tokens, r.tokens);
            const auto ratios = importance_ratios(new_lp, r.logprobs);
            const auto sur = clipped_surrogate(ratios, adv, config.eps_low, config.eps_high);

            coeffs.assign(r.tokens.size(), 0.0);
            for (size_t t = 0; t < r.tokens.size(); ++t) {
                obj.value += agg_w * sur.values[t];
                coeffs[t] = agg_w * sur.grad_weights[t];
                obj.sum_ratio += ratios[t];
            }
            obj.clipped_tokens += sur.clipped;
            obj.tokens += int64_t(r.tokens.size());

            if (config.kl_beta > 0.0) {
                const auto ref_lp = ref_scorer(g.prompt_tokens, r.tokens);
                const auto kl = kl_penalty(new_lp, ref_lp);
                for (size_t t = 0; t < r.tokens.size(); ++t) {
                    obj.value -= config.kl_beta * agg_w * kl.values[t];
                    coeffs[t] -= config.kl_beta * agg_w * kl.grad_weights[t];
                    obj.sum_kl += kl.values[t];
                }
            }

            const PolicyParams g_r = grad_logprob(params, g.prompt_tokens, r.tokens, coeffs);
            obj.grad.axpy(1.0, g_r);
        }
    }
    return obj;
}

UpdateStats policy_update(PolicyParams& live, std::vector<Group> groups,
                          const UpdateConfig& config, const RefScorer& ref_scorer,
                          Rng& shuffle_rng) {
    config.validate();

    UpdateStats stats;
    stats.groups_in = int(groups.size());
    int64_t n_rollouts = 0;
    int64_t n_tokens = 0;
    for (const auto& g : groups) {
        if (int(g.rollouts.size()) != int(g.rewards.size()))
            throw std::invalid_argument("policy_update: rollouts/rewards size mismatch");
        for (size_t i = 0; i < g.rollouts.size(); ++i) {
            stats.mean_reward += g.rewards[i];
            n_tokens += int64_t(g.rollouts[i].tokens.size());
            ++n_rollouts;
        }
    }
    if (n_rollouts > 0) {
        stats.mean_reward /= double(n_rollouts);
        stats.mean_resp_len = double(n_tokens) / double(n_rollouts);
    }

    groups = dynamic_filter(std::move(groups), config.dynamic_filter);
    stats.groups_used = int(groups.size());
    if (groups.empty()) {
        stats.skipped = true;
        return stats;
    }

    // Fisher-Yates over group order, then fixed-size chunks; the remainder
    // chunk is still used.
    for (size_t i = groups.size(); i > 1; --i) {
        const size_t j = size_t(shuffle_rng.uniform_int(0, int64_t(i) - 1));
        std::swap(groups[i - 1], groups[j]);
    }

    double sum_ratio = 0.0, sum_kl = 0.0;
    int64_t clipped = 0, tokens = 0;
    double grad_norm_sum = 0.0;

    for (size_t begin = 0; begin < groups.size(); begin += size_t(config.minibatch_size)) {
        const size_t end = std::min(groups.size(), begin + size_t(config.minibatch_size));
        const std::span<const Group> chunk(groups.data() + begin, end - begin);
        const Objective obj = compute_objective(live, chunk, config, ref_scorer);

        sum_ratio += obj.sum_ratio;
        sum_kl += obj.sum_kl;
        clipped += obj.clipped_tokens;
        tokens += obj.tokens;
        grad_norm_sum += std::sqrt(obj.grad.sq_norm());
        ++stats.minibatch_steps;

        // A fully degenerate chunk has an exactly zero gradient when beta is
        // 0; skipping the write keeps the parameters bit-identical.
        if (config.kl_beta == 0.0 && obj.all_zero_advantage) continue;
        live.axpy(config.learning_rate, obj.grad);
    }

    if (tokens > 0) {
        stats.mean_ratio = sum_ratio / double(tokens);
        stats.clip_fraction = double(clipped) / double(tokens);
        stats.mean_kl = config.kl_beta > 0.0 ? sum_kl / double(tokens) : 0.0;
    }
    if (stats.minibatch_steps > 0)
        stats.grad_norm = grad_norm_sum / double(stats.minibatch_steps);
    return stats;
}

}  // namespace rfl
