#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "refinerl/rng.hpp"

namespace rfl {

using Token = int32_t;

// Fixed token alphabet for the modular-arithmetic task. PAD is a context
// padding artifact and is excluded from the sampling support; everything
// else is ordinary vocabulary.
namespace tok {
inline constexpr Token PAD = 0;
inline constexpr Token D0 = 1;  // digits are D0..D0+9
inline constexpr Token PLUS = 11;
inline constexpr Token TIMES = 12;
inline constexpr Token SEP = 13;
inline constexpr Token ANS = 14;
inline constexpr Token EOS = 15;
inline constexpr Token USR = 16;
inline constexpr Token AST = 17;
inline constexpr Token REVIEW = 18;
inline constexpr Token MEM = 19;
inline constexpr int32_t COUNT = 20;
}  // namespace tok

struct Vocab {
    static constexpr int32_t size = tok::COUNT;

    static constexpr bool is_digit(Token t) { return t >= tok::D0 && t < tok::D0 + 10; }
    static constexpr int digit_value(Token t) { return int(t - tok::D0); }
    static constexpr Token digit(int v) { return tok::D0 + Token(v); }
    static constexpr bool valid(Token t) { return t >= 0 && t < size; }

    static const char* name(Token t) {
        static constexpr std::array<const char*, size> kNames = {
            "<pad>", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
            "+", "*", "<sep>", "<ans>", "<eos>", "<usr>", "<ast>", "<review>", "<mem>"};
        return valid(t) ? kNames[size_t(t)] : "<bad>";
    }

    // Identifies the alphabet in checkpoints and dataset headers.
    static uint64_t hash() {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (Token t = 0; t < size; ++t) {
            for (const char* p = name(t); *p; ++p) {
                h ^= uint64_t(uint8_t(*p));
                h *= 0x100000001b3ULL;
            }
            h ^= 0x7c;  // separator
            h *= 0x100000001b3ULL;
        }
        return h;
    }
};

inline std::string detokenize(std::span<const Token> tokens) {
    std::string out;
    for (Token t : tokens) {
        if (!out.empty()) out += ' ';
        out += Vocab::name(t);
    }
    return out;
}

}  // namespace rfl
