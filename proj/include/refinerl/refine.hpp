#pragma once

#include <optional>
#include <span>
#include <vector>

#include "refinerl/env.hpp"
#include "refinerl/policy.hpp"
#include "refinerl/rlcore.hpp"
#include "refinerl/rng.hpp"

namespace rfl {

// Three-turn refinement conversation: [USR problem][AST base][USR instruction],
// flattened with role delimiter tokens. The instruction is a fixed constant
// regardless of whether the base solution is correct.

// The reserved review-token run used as the refinement instruction.
const std::vector<Token>& refine_instruction();

struct RefinePrompt {
    int64_t problem_ref = 0;
    std::vector<Token> user_problem;
    std::vector<Token> assistant_base;  // possibly middle-elided, see `truncated`
    std::vector<Token> user_instruction;
    std::vector<Token> encoded;  // [USR] problem [AST] base [USR] instruction
    bool truncated = false;
};

// context_budget <= 0 means unlimited. When the encoded sequence would
// exceed the budget, the middle of the base solution is elided (head and
// tail kept) and `truncated` is set.
RefinePrompt build_refine_prompt(const Problem& problem, const Rollout& base,
                                 std::span<const Token> instruction,
                                 int context_budget = 0);

struct DecodedRefine {
    std::vector<Token> problem_prompt;
    std::vector<Token> base;
    std::vector<Token> instruction;
};

// Inverse of the encoding under the delimiter grammar (problem prompts never
// contain AST, the instruction is the fixed constant suffix). Returns absent
// on any grammar violation.
std::optional<DecodedRefine> decode_refine_prompt(std::span<const Token> encoded);

enum class SelectionMode { random };

// Uniform over all G rollouts, blind to correctness.
const Rollout& select_base(const Group& group, SelectionMode mode, Rng& rng);

}  // namespace rfl
