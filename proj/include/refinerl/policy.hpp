#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "refinerl/rng.hpp"
#include "refinerl/vocab.hpp"

namespace rfl {

// Fixed-window autoregressive categorical policy: the last `window` context
// tokens (left-padded with PAD) are embedded, concatenated, pushed through
// one tanh hidden layer and an output affine onto vocab logits. Everything
// is double precision and the gradients are closed-form, so finite
// differences can certify the whole update path.

struct PolicyDims {
    int d_emb = 6;
    int d_hid = 48;
    int window = 22;
};

struct PolicyParams {
    PolicyDims dims;
    int32_t vocab_size = Vocab::size;
    std::vector<double> emb;   // [vocab][d_emb]
    std::vector<double> w_h;   // [d_hid][window * d_emb]
    std::vector<double> b_h;   // [d_hid]
    std::vector<double> w_o;   // [vocab][d_hid]
    std::vector<double> b_o;   // [vocab]

    bool operator==(const PolicyParams&) const = default;

    size_t num_params() const {
        return emb.size() + w_h.size() + b_h.size() + w_o.size() + b_o.size();
    }
    void fill_zero();
    // this += alpha * g (shapes must match)
    void axpy(double alpha, const PolicyParams& g);
    double sq_norm() const;

    // Flat views over all tensors in a fixed order, for finite differencing.
    double* flat_entry(size_t i);
    double flat_entry(size_t i) const;
};

// temperature == 0 denotes greedy decoding (top_p/top_k ignored).
// top_k <= 0 means unlimited.
struct DecodeConfig {
    double temperature = 1.0;
    double top_p = 1.0;
    int top_k = 0;
    int max_len = 8;

    void validate() const;
    bool greedy() const { return temperature == 0.0; }
};

struct Rollout {
    std::vector<Token> prompt;
    std::vector<Token> tokens;     // terminated by EOS or max_len
    std::vector<double> logprobs;  // under the generating params, untruncated
                                   // temperature-1 distribution
    int reward = 0;
};

// Entries ~ Normal(0, init_scale); deterministic per rng state. Draw order
// is emb, w_h, b_h, w_o, b_o.
PolicyParams init_params(const PolicyDims& dims, Rng& rng, double init_scale = 0.1);

// Logits for the next token given a context (the concatenation prompt+generated
// as far as sampled). Pure function of (params, context).
std::vector<double> next_token_logits(const PolicyParams& params,
                                      std::span<const Token> context);

// In-place log-softmax with max subtraction; exp of the result sums to 1.
void log_softmax_inplace(std::span<double> logits);

// Autoregressive sampling: temperature scaling, then top-k, then top-p
// truncation with renormalization, PAD excluded from the support. Recorded
// logprobs always come from the full untruncated temperature-1 distribution.
Rollout sample(const PolicyParams& params, std::span<const Token> prompt,
               const DecodeConfig& decode, Rng& rng);

// Log-probabilities of the given tokens under params. For the generating
// params this reproduces the rollout's stored logprobs exactly.
std::vector<double> score(const PolicyParams& params, std::span<const Token> prompt,
                          std::span<const Token> tokens);

// Gradient of sum_t weights[t] * log pi(tokens[t] | context_t) with respect
// to every parameter. weights must have one entry per token.
PolicyParams grad_logprob(const PolicyParams& params, std::span<const Token> prompt,
                          std::span<const Token> tokens, std::span<const double> weights);

// Deep value copy frozen against later updates to the source.
PolicyParams snapshot(const PolicyParams& params);

// Versioned binary checkpoint carrying dims and the vocab hash; loading
// validates both.
void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace rfl
