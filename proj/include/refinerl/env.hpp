#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "refinerl/rng.hpp"
#include "refinerl/vocab.hpp"

namespace rfl {

// Synthetic verifiable environment: prompts encode a start value and a chain
// of +/* operations; the answer is the chain's exact value reduced by the
// task modulus. The verifier is exact string equality after canonicalization.

struct TaskSpec {
    int64_t modulus = 10;
    int chain_length = 2;
    int64_t operand_lo = 0;  // inclusive; also the range of the start value
    int64_t operand_hi = 9;
    Vocab vocab;

    void validate() const;  // throws std::invalid_argument on a bad spec
    bool same_task(const TaskSpec& o) const {
        return modulus == o.modulus && chain_length == o.chain_length &&
               operand_lo == o.operand_lo && operand_hi == o.operand_hi;
    }
};

struct Problem {
    int64_t id = 0;
    std::vector<Token> prompt;  // digits(start) (op digits(operand))* SEP
    std::string answer;         // canonical decimal string
};

struct ProblemSet {
    TaskSpec spec;
    std::vector<Problem> problems;
};

// Nonnegative value -> digit tokens, no leading zeros ("0" is a single D0).
std::vector<Token> encode_number(int64_t v);

// Deterministic given the rng state. The caller assigns ids.
Problem generate_problem(const TaskSpec& spec, Rng& rng, int64_t id = 0);

// Convenience used by gen-data: id-dense set with distinct prompts, each
// problem drawn from its own derived stream so generation order is free.
ProblemSet generate_problem_set(const TaskSpec& spec, int count, uint64_t seed);

// Decimal string formed by the maximal digit run right after the LAST ANS
// token, terminated by EOS or any non-digit. Absent if there is no ANS or no
// digit follows it. Malformed output is absent, never an error.
std::optional<std::string> extract_answer(std::span<const Token> tokens);

// Strip leading zeros; "0" stays "0". Empty input stays empty.
std::string canonical_answer(std::string_view digits);

// 1 iff extract_answer(tokens) is present and canonically equal to
// problem.answer, else 0.
int verify(std::span<const Token> tokens, const Problem& problem);

// Line-delimited records {id, prompt_tokens, answer}; the task spec and
// token alphabet live in a sibling <stem>.meta.json header file. Save and
// load round-trip byte-for-byte.
void save_problems(const ProblemSet& ps, const std::filesystem::path& path);
ProblemSet load_problems(const std::filesystem::path& path);

std::filesystem::path meta_path_for(const std::filesystem::path& problems_path);

}  // namespace rfl
