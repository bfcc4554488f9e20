#include "refinerl/evalkit.hpp"

#include <algorithm>
#include <stdexcept>

namespace rfl {

namespace {

DecodeConfig greedy_like(const DecodeConfig& decode) {
    DecodeConfig g = decode;
    g.temperature = 0.0;
    return g;
}

Rollout greedy_refine(const Generator& gen, const Problem& problem, const Rollout& base,
                      const DecodeConfig& decode, int context_budget, Rng& rng) {
    const RefinePrompt rp =
        build_refine_prompt(problem, base, refine_instruction(), context_budget);
    return gen.generate(rp.encoded, greedy_like(decode), rng);
}

}  // namespace

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n) throw std::domain_error("pass_at_k: need 0 <= c <= n");
    if (k < 1 || k > n) throw std::domain_error("pass_at_k: need 1 <= k <= n");
    double prod = 1.0;
    for (int j = 0; j < k; ++j) {
        const int num = n - c - j;
        if (num <= 0) return 1.0;  // a zero factor forces pass@k to 1
        prod *= double(num) / double(n - j);
    }
    return 1.0 - prod;
}

double PassKTable::problem_pass(size_t i, int k) const {
    return pass_at_k(n, correct_counts.at(i), k);
}

double PassKTable::macro_pass(int k) const {
    if (correct_counts.empty()) return 0.0;
    double sum = 0.0;
    for (int c : correct_counts) sum += pass_at_k(n, c, k);
    return sum / double(correct_counts.size());
}

PassKTable eval_reasoning(const Generator& gen, const ProblemSet& problems, int n,
                          const DecodeConfig& decode, std::span<const int> k_list,
                          uint64_t seed) {
    for (int k : k_list) {
        if (n < k) throw std::invalid_argument("eval_reasoning: n must cover max k");
    }
    PassKTable table;
    table.n = n;
    table.k_list.assign(k_list.begin(), k_list.end());
    table.correct_counts.reserve(problems.problems.size());
    for (size_t pi = 0; pi < problems.problems.size(); ++pi) {
        const Problem& p = problems.problems[pi];
        Rng rng = derive_rng(seed, "eval_reason", pi);
        int c = 0;
        for (int s = 0; s < n; ++s) {
            const Rollout r = gen.generate(p.prompt, decode, rng);
            c += verify(r.tokens, p);
        }
        table.correct_counts.push_back(c);
    }
    return table;
}

SelfRefineResult eval_self_refinement(const Generator& gen, const ProblemSet& problems,
                                      int n, const DecodeConfig& base_decode,
                                      std::span<const int> k_list, int context_budget,
                                      uint64_t seed) {
    for (int k : k_list) {
        if (n < k) throw std::invalid_argument("eval_self_refinement: n must cover max k");
    }
    SelfRefineResult out;
    out.base.n = n;
    out.refined.n = n;
    out.base.k_list.assign(k_list.begin(), k_list.end());
    out.refined.k_list = out.base.k_list;

    for (size_t pi = 0; pi < problems.problems.size(); ++pi) {
        const Problem& p = problems.problems[pi];
        Rng rng = derive_rng(seed, "eval_refine", pi);
        int c_base = 0, c_ref = 0;
        for (int s = 0; s < n; ++s) {
            const Rollout base = gen.generate(p.prompt, base_decode, rng);
            const int base_ok = verify(base.tokens, p);
            Rollout refined = greedy_refine(gen, p, base, base_decode, context_budget, rng);
            refined.reward = verify(refined.tokens, p);
            c_base += base_ok;
            c_ref += refined.reward;
            out.base_outcomes.push_back(base_ok);
            out.refined_outcomes.push_back(refined.reward);
            out.refined_rollouts.push_back(std::move(refined));
        }
        out.base.correct_counts.push_back(c_base);
        out.refined.correct_counts.push_back(c_ref);
    }
    return out;
}

double cross_refine(const Generator& reasoner, const Generator& refiner,
                    const ProblemSet& problems, int k_ref,
                    const DecodeConfig& refine_decode, int context_budget,
                    uint64_t seed) {
    if (k_ref < 1) throw std::invalid_argument("cross_refine: k_ref must be >= 1");
    if (problems.problems.empty()) return 0.0;
    int solved = 0;
    for (size_t pi = 0; pi < problems.problems.size(); ++pi) {
        const Problem& p = problems.problems[pi];
        Rng rng = derive_rng(seed, "eval_cross", pi);
        const Rollout base = reasoner.generate(p.prompt, greedy_like(refine_decode), rng);
        const RefinePrompt rp =
            build_refine_prompt(p, base, refine_instruction(), context_budget);
        bool any = false;
        for (int s = 0; s < k_ref && !any; ++s) {
            const Rollout refined = refiner.generate(rp.encoded, refine_decode, rng);
            any = verify(refined.tokens, p) == 1;
        }
        solved += any ? 1 : 0;
    }
    return double(solved) / double(problems.problems.size());
}

TransitionStats transition_stats(std::span<const int> base_outcomes,
                                 std::span<const int> refined_outcomes) {
    if (base_outcomes.size() != refined_outcomes.size())
        throw std::invalid_argument("transition_stats: length mismatch");
    TransitionStats t;
    for (size_t i = 0; i < base_outcomes.size(); ++i) {
        const bool b = base_outcomes[i] != 0;
        const bool r = refined_outcomes[i] != 0;
        if (!b && r) ++t.wrong_to_correct;
        if (!b && !r) ++t.wrong_to_wrong;
        if (b && !r) ++t.correct_to_wrong;
        if (b && r) ++t.correct_to_correct;
    }
    const int64_t wrong = t.wrong_to_correct + t.wrong_to_wrong;
    const int64_t correct = t.correct_to_wrong + t.correct_to_correct;
    if (wrong > 0) t.fix_wrong = double(t.wrong_to_correct) / double(wrong);
    if (correct > 0) t.damage_correct = double(t.correct_to_wrong) / double(correct);
    return t;
}

LengthMarkerMetrics length_marker_metrics(std::span<const Rollout> rollouts,
                                          LengthFilter filter,
                                          std::span<const int> base_outcomes) {
    if (filter == LengthFilter::base_correct_only &&
        base_outcomes.size() != rollouts.size())
        throw std::invalid_argument("length_marker_metrics: base outcomes misaligned");

    int64_t count = 0, with_ans = 0, final_ans = 0;
    int64_t total_len = 0;
    for (size_t i = 0; i < rollouts.size(); ++i) {
        if (filter == LengthFilter::base_correct_only && base_outcomes[i] == 0) continue;
        const auto& toks = rollouts[i].tokens;
        ++count;
        total_len += int64_t(toks.size());
        if (std::find(toks.begin(), toks.end(), tok::ANS) != toks.end()) ++with_ans;

        // Last non-EOS content must be an ANS followed by one or more digits.
        size_t end = toks.size();
        while (end > 0 && toks[end - 1] == tok::EOS) --end;
        size_t d = end;
        while (d > 0 && Vocab::is_digit(toks[d - 1])) --d;
        if (d < end && d > 0 && toks[d - 1] == tok::ANS) ++final_ans;
    }

    LengthMarkerMetrics m;
    if (count > 0) {
        m.mean_length = double(total_len) / double(count);
        m.ans_rate = double(with_ans) / double(count);
        m.final_ans_rate = double(final_ans) / double(count);
    }
    return m;
}

Rollout self_refine_baseline(const Generator& gen, const Problem& problem, int t_iters,
                             const DecodeConfig& base_decode, int context_budget,
                             uint64_t seed) {
    if (t_iters < 1) throw std::invalid_argument("self_refine_baseline: t_iters must be >= 1");
    Rng rng = derive_rng(seed, "self_refine", uint64_t(problem.id));
    Rollout current = gen.generate(problem.prompt, base_decode, rng);
    for (int t = 0; t < t_iters; ++t) {
        current = greedy_refine(gen, problem, current, base_decode, context_budget, rng);
    }
    current.reward = verify(current.tokens, problem);
    return current;
}

std::vector<Token> reflexion_retry_prompt(const Problem& problem,
                                          std::span<const std::vector<Token>> memories) {
    std::vector<Token> out;
    out.push_back(tok::USR);
    out.insert(out.end(), problem.prompt.begin(), problem.prompt.end());
    for (const auto& m : memories) {
        out.push_back(tok::MEM);
        out.insert(out.end(), m.begin(), m.end());
    }
    return out;
}

Rollout reflexion_baseline(const Generator& gen, const Problem& problem, int retries,
                           const DecodeConfig& base_decode, int context_budget,
                           uint64_t seed) {
    if (retries < 1) throw std::invalid_argument("reflexion_baseline: retries must be >= 1");
    Rng rng = derive_rng(seed, "reflexion", uint64_t(problem.id));
    Rollout attempt = gen.generate(problem.prompt, base_decode, rng);
    std::vector<std::vector<Token>> memories;
    Rollout retry;
    for (int t = 0; t < retries; ++t) {
        // The refinement stage produces a memory, kept but never scored.
        const Rollout memory =
            greedy_refine(gen, problem, attempt, base_decode, context_budget, rng);
        memories.push_back(memory.tokens);
        const auto prompt = reflexion_retry_prompt(problem, memories);
        retry = gen.generate(prompt, greedy_like(base_decode), rng);
        attempt = retry;
    }
    retry.reward = verify(retry.tokens, problem);
    return retry;
}

}  // namespace rfl
