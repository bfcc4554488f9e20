#include "refinerl/refine.hpp"

#include <algorithm>
#include <stdexcept>

namespace rfl {

const std::vector<Token>& refine_instruction() {
    static const std::vector<Token> kInstruction = {tok::REVIEW};
    return kInstruction;
}

RefinePrompt build_refine_prompt(const Problem& problem, const Rollout& base,
                                 std::span<const Token> instruction,
                                 int context_budget) {
    for (Token t : problem.prompt) {
        if (t == tok::AST)
            throw std::invalid_argument("build_refine_prompt: problem prompt contains AST");
    }

    RefinePrompt rp;
    rp.problem_ref = problem.id;
    rp.user_problem = problem.prompt;
    rp.user_instruction.assign(instruction.begin(), instruction.end());
    rp.assistant_base = base.tokens;

    const size_t overhead = 3 + problem.prompt.size() + rp.user_instruction.size();
    if (context_budget > 0 && overhead + rp.assistant_base.size() > size_t(context_budget)) {
        const size_t keep =
            size_t(context_budget) > overhead ? size_t(context_budget) - overhead : 0;
        const size_t head = (keep + 1) / 2;
        const size_t tail = keep - head;
        std::vector<Token> elided;
        elided.reserve(keep);
        elided.insert(elided.end(), rp.assistant_base.begin(),
                      rp.assistant_base.begin() + ptrdiff_t(head));
        elided.insert(elided.end(), rp.assistant_base.end() - ptrdiff_t(tail),
                      rp.assistant_base.end());
        rp.assistant_base = std::move(elided);
        rp.truncated = true;
    }

    rp.encoded.reserve(overhead + rp.assistant_base.size());
    rp.encoded.push_back(tok::USR);
    rp.encoded.insert(rp.encoded.end(), rp.user_problem.begin(), rp.user_problem.end());
    rp.encoded.push_back(tok::AST);
    rp.encoded.insert(rp.encoded.end(), rp.assistant_base.begin(), rp.assistant_base.end());
    rp.encoded.push_back(tok::USR);
    rp.encoded.insert(rp.encoded.end(), rp.user_instruction.begin(),
                      rp.user_instruction.end());
    return rp;
}

std::optional<DecodedRefine> decode_refine_prompt(std::span<const Token> encoded) {
    const auto& instr = refine_instruction();
    // Shortest legal encoding: USR + AST + USR + instruction (empty turns).
    if (encoded.size() < 3 + instr.size()) return std::nullopt;
    if (encoded.front() != tok::USR) return std::nullopt;

    // Problem prompts cannot contain AST, so the first AST closes turn one.
    size_t ast = 1;
    while (ast < encoded.size() && encoded[ast] != tok::AST) ++ast;
    if (ast == encoded.size()) return std::nullopt;

    // The instruction is a fixed constant, so the final turn is a fixed
    // suffix regardless of what the assistant turn contains.
    const size_t suffix_at = encoded.size() - instr.size() - 1;
    if (suffix_at < ast + 1) return std::nullopt;
    if (encoded[suffix_at] != tok::USR) return std::nullopt;
    for (size_t i = 0; i < instr.size(); ++i) {
        if (encoded[suffix_at + 1 + i] != instr[i]) return std::nullopt;
    }

    DecodedRefine out;
    out.problem_prompt.assign(encoded.begin() + 1, encoded.begin() + ptrdiff_t(ast));
    out.base.assign(encoded.begin() + ptrdiff_t(ast) + 1,
                    encoded.begin() + ptrdiff_t(suffix_at));
    out.instruction = instr;
    if (std::find(out.problem_prompt.begin(), out.problem_prompt.end(), tok::AST) !=
        out.problem_prompt.end())
        return std::nullopt;
    return out;
}

const Rollout& select_base(const Group& group, SelectionMode mode, Rng& rng) {
    if (group.rollouts.empty())
        throw std::invalid_argument("select_base: empty group");
    switch (mode) {
        case SelectionMode::random: {
            const auto idx = size_t(rng.uniform_int(0, int64_t(group.rollouts.size()) - 1));
            return group.rollouts[idx];
        }
    }
    throw std::invalid_argument("select_base: unknown mode");
}

}  // namespace rfl
