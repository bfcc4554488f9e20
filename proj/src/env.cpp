#include "refinerl/env.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rfl {

using ordered_json = nlohmann::ordered_json;

void TaskSpec::validate() const {
    if (modulus < 2) throw std::invalid_argument("task: modulus must be >= 2");
    if (chain_length < 1) throw std::invalid_argument("task: chain_length must be >= 1");
    if (operand_lo < 0) throw std::invalid_argument("task: operand_lo must be >= 0");
    if (operand_hi < operand_lo)
        throw std::invalid_argument("task: operand_hi must be >= operand_lo");
    // Keep the exact chain value inside int64 even before modular reduction
    // so an independent integer oracle can re-evaluate it.
    long double bound = (long double)std::max<int64_t>(operand_hi, 1);
    for (int i = 0; i < chain_length; ++i) {
        bound = bound * (long double)std::max<int64_t>(operand_hi, 1) +
                (long double)operand_hi;
        if (bound > 4.0e18L)
            throw std::invalid_argument("task: operand range/chain length overflow int64");
    }
}

std::vector<Token> encode_number(int64_t v) {
    if (v < 0) throw std::invalid_argument("encode_number: negative value");
    std::string s = std::to_string(v);
    std::vector<Token> out;
    out.reserve(s.size());
    for (char c : s) out.push_back(Vocab::digit(c - '0'));
    return out;
}

Problem generate_problem(const TaskSpec& spec, Rng& rng, int64_t id) {
    Problem p;
    p.id = id;
    const int64_t start = rng.uniform_int(spec.operand_lo, spec.operand_hi);
    std::vector<Token> prompt = encode_number(start);
    int64_t value = start % spec.modulus;
    for (int i = 0; i < spec.chain_length; ++i) {
        const bool mul = rng.uniform_int(0, 1) == 1;
        const int64_t operand = rng.uniform_int(spec.operand_lo, spec.operand_hi);
        prompt.push_back(mul ? tok::TIMES : tok::PLUS);
        const auto digits = encode_number(operand);
        prompt.insert(prompt.end(), digits.begin(), digits.end());
        // Reducing as we go equals exact evaluation then reduction: mod is a
        // ring homomorphism for + and *.
        value = mul ? (value * (operand % spec.modulus)) % spec.modulus
                    : (value + operand) % spec.modulus;
    }
    prompt.push_back(tok::SEP);
    p.prompt = std::move(prompt);
    p.answer = std::to_string(value);
    return p;
}

ProblemSet generate_problem_set(const TaskSpec& spec, int count, uint64_t seed) {
    spec.validate();
    if (count < 0) throw std::invalid_argument("generate_problem_set: negative count");
    ProblemSet ps;
    ps.spec = spec;
    std::set<std::vector<Token>> seen;
    for (int i = 0; i < count; ++i) {
        for (uint64_t attempt = 0;; ++attempt) {
            Rng rng = derive_rng(seed, "data", uint64_t(i), attempt);
            Problem p = generate_problem(spec, rng, i);
            if (seen.insert(p.prompt).second) {
                ps.problems.push_back(std::move(p));
                break;
            }
            if (attempt > 10000)
                throw std::runtime_error("generate_problem_set: task space too small for count");
        }
    }
    return ps;
}

std::optional<std::string> extract_answer(std::span<const Token> tokens) {
    ptrdiff_t last_ans = -1;
    for (ptrdiff_t i = 0; i < ptrdiff_t(tokens.size()); ++i) {
        if (tokens[size_t(i)] == tok::ANS) last_ans = i;
    }
    if (last_ans < 0) return std::nullopt;
    std::string digits;
    for (size_t i = size_t(last_ans) + 1; i < tokens.size(); ++i) {
        if (!Vocab::is_digit(tokens[i])) break;
        digits += char('0' + Vocab::digit_value(tokens[i]));
    }
    if (digits.empty()) return std::nullopt;
    return digits;
}

std::string canonical_answer(std::string_view digits) {
    size_t i = 0;
    while (i + 1 < digits.size() && digits[i] == '0') ++i;
    return std::string(digits.substr(i));
}

int verify(std::span<const Token> tokens, const Problem& problem) {
    const auto extracted = extract_answer(tokens);
    if (!extracted) return 0;
    return canonical_answer(*extracted) == canonical_answer(problem.answer) ? 1 : 0;
}

std::filesystem::path meta_path_for(const std::filesystem::path& problems_path) {
    std::filesystem::path p = problems_path;
    p.replace_extension();
    p += ".meta.json";
    return p;
}

namespace {

ordered_json meta_json(const TaskSpec& spec) {
    ordered_json vocab_names = ordered_json::array();
    for (Token t = 0; t < Vocab::size; ++t) vocab_names.push_back(Vocab::name(t));
    return ordered_json{{"modulus", spec.modulus},
                        {"chain_length", spec.chain_length},
                        {"operand_lo", spec.operand_lo},
                        {"operand_hi", spec.operand_hi},
                        {"vocab", vocab_names},
                        {"vocab_hash", Vocab::hash()}};
}

}  // namespace

void save_problems(const ProblemSet& ps, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_problems: cannot open " + path.string());
    for (const auto& p : ps.problems) {
        ordered_json rec{{"id", p.id}, {"prompt_tokens", p.prompt}, {"answer", p.answer}};
        out << rec.dump() << '\n';
    }
    out.close();
    std::ofstream meta(meta_path_for(path), std::ios::binary);
    if (!meta)
        throw std::runtime_error("save_problems: cannot open " + meta_path_for(path).string());
    meta << meta_json(ps.spec).dump(2) << '\n';
}

ProblemSet load_problems(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_problems: cannot open " + path.string());

    ProblemSet ps;
    const auto meta_file = meta_path_for(path);
    {
        std::ifstream meta(meta_file, std::ios::binary);
        if (!meta)
            throw std::runtime_error("load_problems: missing header file " + meta_file.string());
        ordered_json m;
        try {
            meta >> m;
        } catch (const std::exception& e) {
            throw std::runtime_error("load_problems: " + meta_file.string() + ": " + e.what());
        }
        ps.spec.modulus = m.at("modulus").get<int64_t>();
        ps.spec.chain_length = m.at("chain_length").get<int>();
        ps.spec.operand_lo = m.at("operand_lo").get<int64_t>();
        ps.spec.operand_hi = m.at("operand_hi").get<int64_t>();
        if (m.at("vocab_hash").get<uint64_t>() != Vocab::hash())
            throw std::runtime_error("load_problems: vocab mismatch in " + meta_file.string());
        ps.spec.validate();
    }

    std::set<int64_t> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ordered_json rec;
        try {
            rec = ordered_json::parse(line);
            Problem p;
            p.id = rec.at("id").get<int64_t>();
            p.prompt = rec.at("prompt_tokens").get<std::vector<Token>>();
            p.answer = rec.at("answer").get<std::string>();
            for (Token t : p.prompt) {
                if (!Vocab::valid(t)) throw std::runtime_error("token id out of range");
                if (t == tok::ANS) throw std::runtime_error("prompt contains ANS token");
            }
            if (!ids.insert(p.id).second)
                throw std::runtime_error("duplicate id " + std::to_string(p.id));
            ps.problems.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": " + e.what());
        }
    }
    // ids unique and dense from 0
    for (size_t i = 0; i < ps.problems.size(); ++i) {
        if (!ids.count(int64_t(i)))
            throw std::runtime_error("load_problems: ids not dense from 0 in " + path.string());
    }
    return ps;
}

}  // namespace rfl
