#include "refinerl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "refinerl/kernels.hpp"

namespace rfl {

namespace {

constexpr char kCkptMagic[8] = {'R', 'F', 'L', 'C', 'K', 'P', 'T', '1'};

void check_dims(const PolicyDims& d) {
    if (d.d_emb < 1 || d.d_hid < 1 || d.window < 1)
        throw std::invalid_argument("policy dims must be positive");
}

size_t hidden_in(const PolicyDims& d) { return size_t(d.window) * size_t(d.d_emb); }

// Gather the last `window` tokens of (prompt, tokens[0..t)), left-padding
// with PAD when the context is short.
void gather_context(std::span<const Token> prompt, std::span<const Token> tokens,
                    size_t t, int window, Token* out) {
    const ptrdiff_t total = ptrdiff_t(prompt.size()) + ptrdiff_t(t);
    for (int w = 0; w < window; ++w) {
        const ptrdiff_t pos = total - window + w;
        if (pos < 0) {
            out[w] = tok::PAD;
        } else if (pos < ptrdiff_t(prompt.size())) {
            out[w] = prompt[size_t(pos)];
        } else {
            out[w] = tokens[size_t(pos - ptrdiff_t(prompt.size()))];
        }
    }
}

struct Forward {
    std::vector<Token> ctx;   // [window]
    std::vector<double> x;    // [window * d_emb]
    std::vector<double> h;    // [d_hid]
    std::vector<double> lp;   // [vocab], log-probabilities
};

void forward_position(const PolicyParams& p, std::span<const Token> prompt,
                      std::span<const Token> tokens, size_t t, Forward& f) {
    const auto& d = p.dims;
    const size_t nin = hidden_in(d);
    f.ctx.resize(size_t(d.window));
    f.x.resize(nin);
    f.h.resize(size_t(d.d_hid));
    f.lp.resize(size_t(p.vocab_size));

    gather_context(prompt, tokens, t, d.window, f.ctx.data());
    for (int w = 0; w < d.window; ++w) {
        std::memcpy(f.x.data() + size_t(w) * size_t(d.d_emb),
                    p.emb.data() + size_t(f.ctx[size_t(w)]) * size_t(d.d_emb),
                    sizeof(double) * size_t(d.d_emb));
    }
    kern::affine(p.w_h.data(), p.b_h.data(), f.x.data(), f.h.data(),
                 size_t(d.d_hid), nin);
    for (double& v : f.h) v = std::tanh(v);
    kern::affine(p.w_o.data(), p.b_o.data(), f.h.data(), f.lp.data(),
                 size_t(p.vocab_size), size_t(d.d_hid));
    log_softmax_inplace(f.lp);
}

}  // namespace

void PolicyParams::fill_zero() {
    std::fill(emb.begin(), emb.end(), 0.0);
    std::fill(w_h.begin(), w_h.end(), 0.0);
    std::fill(b_h.begin(), b_h.end(), 0.0);
    std::fill(w_o.begin(), w_o.end(), 0.0);
    std::fill(b_o.begin(), b_o.end(), 0.0);
}

void PolicyParams::axpy(double alpha, const PolicyParams& g) {
    if (num_params() != g.num_params())
        throw std::invalid_argument("PolicyParams::axpy: shape mismatch");
    kern::axpy(alpha, g.emb.data(), emb.data(), emb.size());
    kern::axpy(alpha, g.w_h.data(), w_h.data(), w_h.size());
    kern::axpy(alpha, g.b_h.data(), b_h.data(), b_h.size());
    kern::axpy(alpha, g.w_o.data(), w_o.data(), w_o.size());
    kern::axpy(alpha, g.b_o.data(), b_o.data(), b_o.size());
}

double PolicyParams::sq_norm() const {
    double s = 0.0;
    s += kern::dot(emb.data(), emb.data(), emb.size());
    s += kern::dot(w_h.data(), w_h.data(), w_h.size());
    s += kern::dot(b_h.data(), b_h.data(), b_h.size());
    s += kern::dot(w_o.data(), w_o.data(), w_o.size());
    s += kern::dot(b_o.data(), b_o.data(), b_o.size());
    return s;
}

double* PolicyParams::flat_entry(size_t i) {
    if (i < emb.size()) return &emb[i];
    i -= emb.size();
    if (i < w_h.size()) return &w_h[i];
    i -= w_h.size();
    if (i < b_h.size()) return &b_h[i];
    i -= b_h.size();
    if (i < w_o.size()) return &w_o[i];
    i -= w_o.size();
    if (i < b_o.size()) return &b_o[i];
    throw std::out_of_range("PolicyParams::flat_entry");
}

double PolicyParams::flat_entry(size_t i) const {
    return *const_cast<PolicyParams*>(this)->flat_entry(i);
}

void DecodeConfig::validate() const {
    if (temperature < 0.0) throw std::invalid_argument("decode: temperature must be >= 0");
    if (!(top_p > 0.0) || top_p > 1.0)
        throw std::invalid_argument("decode: top_p must be in (0, 1]");
    if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
}

PolicyParams init_params(const PolicyDims& dims, Rng& rng, double init_scale) {
    check_dims(dims);
    PolicyParams p;
    p.dims = dims;
    p.vocab_size = Vocab::size;
    p.emb.resize(size_t(p.vocab_size) * size_t(dims.d_emb));
    p.w_h.resize(size_t(dims.d_hid) * hidden_in(dims));
    p.b_h.resize(size_t(dims.d_hid));
    p.w_o.resize(size_t(p.vocab_size) * size_t(dims.d_hid));
    p.b_o.resize(size_t(p.vocab_size));
    for (auto* v : {&p.emb, &p.w_h, &p.b_h, &p.w_o, &p.b_o}) {
        for (double& e : *v) e = rng.normal(0.0, init_scale);
    }
    return p;
}

void log_softmax_inplace(std::span<double> logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (double& v : logits) v -= lse;
}

std::vector<double> next_token_logits(const PolicyParams& params,
                                      std::span<const Token> context) {
    const auto& d = params.dims;
    const size_t nin = hidden_in(d);
    std::vector<Token> ctx(size_t(d.window));
    gather_context(context, {}, 0, d.window, ctx.data());
    std::vector<double> x(nin);
    for (int w = 0; w < d.window; ++w) {
        std::memcpy(x.data() + size_t(w) * size_t(d.d_emb),
                    params.emb.data() + size_t(ctx[size_t(w)]) * size_t(d.d_emb),
                    sizeof(double) * size_t(d.d_emb));
    }
    std::vector<double> h(size_t(d.d_hid));
    kern::affine(params.w_h.data(), params.b_h.data(), x.data(), h.data(),
                 size_t(d.d_hid), nin);
    for (double& v : h) v = std::tanh(v);
    std::vector<double> logits(size_t(params.vocab_size));
    kern::affine(params.w_o.data(), params.b_o.data(), h.data(), logits.data(),
                 size_t(params.vocab_size), size_t(d.d_hid));
    return logits;
}

namespace {

// Candidates ordered by (logit desc, token asc); PAD excluded. Returns the
// chosen token. Greedy takes the front; otherwise temperature/top-k/top-p
// shape the draw.
Token decode_token(std::span<const double> lp_full, const DecodeConfig& decode, Rng& rng) {
    const int32_t v = int32_t(lp_full.size());
    std::vector<int32_t> order;
    order.reserve(size_t(v) - 1);
    for (int32_t t = 0; t < v; ++t) {
        if (t != tok::PAD) order.push_back(t);
    }
    std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        if (lp_full[size_t(a)] != lp_full[size_t(b)]) return lp_full[size_t(a)] > lp_full[size_t(b)];
        return a < b;
    });

    if (decode.greedy()) return order.front();

    if (decode.top_k > 0 && size_t(decode.top_k) < order.size())
        order.resize(size_t(decode.top_k));

    // Temperature over log-probabilities preserves the logit ordering and
    // differs from scaled raw logits only by a constant, which softmax drops.
    std::vector<double> probs(order.size());
    const double mx = lp_full[size_t(order.front())] / decode.temperature;
    double sum = 0.0;
    for (size_t i = 0; i < order.size(); ++i) {
        probs[i] = std::exp(lp_full[size_t(order[i])] / decode.temperature - mx);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;

    size_t keep = order.size();
    if (decode.top_p < 1.0) {
        double cum = 0.0;
        for (size_t i = 0; i < order.size(); ++i) {
            cum += probs[i];
            if (cum >= decode.top_p) {
                keep = i + 1;
                break;
            }
        }
    }

    double total = 0.0;
    for (size_t i = 0; i < keep; ++i) total += probs[i];
    const double u = rng.uniform01() * total;
    double cum = 0.0;
    for (size_t i = 0; i < keep; ++i) {
        cum += probs[i];
        if (u < cum) return order[i];
    }
    return order[keep - 1];
}

}  // namespace

Rollout sample(const PolicyParams& params, std::span<const Token> prompt,
               const DecodeConfig& decode, Rng& rng) {
    decode.validate();
    Rollout r;
    r.prompt.assign(prompt.begin(), prompt.end());
    Forward f;
    for (int t = 0; t < decode.max_len; ++t) {
        forward_position(params, prompt, r.tokens, size_t(t), f);
        const Token chosen = decode_token(f.lp, decode, rng);
        r.tokens.push_back(chosen);
        r.logprobs.push_back(f.lp[size_t(chosen)]);
        if (chosen == tok::EOS) break;
    }
    return r;
}

std::vector<double> score(const PolicyParams& params, std::span<const Token> prompt,
                          std::span<const Token> tokens) {
    std::vector<double> out;
    out.reserve(tokens.size());
    Forward f;
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (!Vocab::valid(tokens[t])) throw std::invalid_argument("score: token out of range");
        forward_position(params, prompt, tokens, t, f);
        out.push_back(f.lp[size_t(tokens[t])]);
    }
    return out;
}

PolicyParams grad_logprob(const PolicyParams& params, std::span<const Token> prompt,
                          std::span<const Token> tokens, std::span<const double> weights) {
    if (tokens.size() != weights.size())
        throw std::invalid_argument("grad_logprob: weights length mismatch");
    const auto& d = params.dims;
    const size_t nin = hidden_in(d);

    PolicyParams g = params;
    g.fill_zero();

    Forward f;
    std::vector<double> dlogits(size_t(params.vocab_size));
    std::vector<double> dh(size_t(d.d_hid));
    std::vector<double> dpre(size_t(d.d_hid));
    std::vector<double> dx(nin);

    for (size_t t = 0; t < tokens.size(); ++t) {
        const double w = weights[t];
        forward_position(params, prompt, tokens, t, f);

        // d/dlogits of w * log softmax(logits)[y] = w * (onehot(y) - probs)
        for (int32_t k = 0; k < params.vocab_size; ++k)
            dlogits[size_t(k)] = -w * std::exp(f.lp[size_t(k)]);
        dlogits[size_t(tokens[t])] += w;

        kern::ger_acc(g.w_o.data(), 1.0, dlogits.data(), f.h.data(),
                      size_t(params.vocab_size), size_t(d.d_hid));
        kern::axpy(1.0, dlogits.data(), g.b_o.data(), size_t(params.vocab_size));

        std::fill(dh.begin(), dh.end(), 0.0);
        kern::affine_t_acc(params.w_o.data(), dlogits.data(), dh.data(),
                           size_t(params.vocab_size), size_t(d.d_hid));
        for (size_t i = 0; i < dh.size(); ++i)
            dpre[i] = dh[i] * (1.0 - f.h[i] * f.h[i]);

        kern::ger_acc(g.w_h.data(), 1.0, dpre.data(), f.x.data(), size_t(d.d_hid), nin);
        kern::axpy(1.0, dpre.data(), g.b_h.data(), size_t(d.d_hid));

        std::fill(dx.begin(), dx.end(), 0.0);
        kern::affine_t_acc(params.w_h.data(), dpre.data(), dx.data(), size_t(d.d_hid), nin);
        for (int s = 0; s < d.window; ++s) {
            kern::axpy(1.0, dx.data() + size_t(s) * size_t(d.d_emb),
                       g.emb.data() + size_t(f.ctx[size_t(s)]) * size_t(d.d_emb),
                       size_t(d.d_emb));
        }
    }
    return g;
}

PolicyParams snapshot(const PolicyParams& params) { return params; }

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    out.write(kCkptMagic, sizeof(kCkptMagic));
    const uint64_t vh = Vocab::hash();
    const int32_t header[4] = {params.vocab_size, params.dims.d_emb, params.dims.d_hid,
                               params.dims.window};
    out.write(reinterpret_cast<const char*>(&vh), sizeof(vh));
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (const auto* v : {&params.emb, &params.w_h, &params.b_h, &params.w_o, &params.b_o}) {
        out.write(reinterpret_cast<const char*>(v->data()),
                  std::streamsize(v->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    uint64_t vh = 0;
    int32_t header[4];
    in.read(reinterpret_cast<char*>(&vh), sizeof(vh));
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
    if (vh != Vocab::hash())
        throw std::runtime_error("load_checkpoint: vocab mismatch in " + path.string());
    if (header[0] != Vocab::size)
        throw std::runtime_error("load_checkpoint: vocab size mismatch in " + path.string());

    PolicyParams p;
    p.vocab_size = header[0];
    p.dims = PolicyDims{header[1], header[2], header[3]};
    check_dims(p.dims);
    p.emb.resize(size_t(p.vocab_size) * size_t(p.dims.d_emb));
    p.w_h.resize(size_t(p.dims.d_hid) * hidden_in(p.dims));
    p.b_h.resize(size_t(p.dims.d_hid));
    p.w_o.resize(size_t(p.vocab_size) * size_t(p.dims.d_hid));
    p.b_o.resize(size_t(p.vocab_size));
    for (auto* v : {&p.emb, &p.w_h, &p.b_h, &p.w_o, &p.b_o}) {
        in.read(reinterpret_cast<char*>(v->data()), std::streamsize(v->size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated tensors in " + path.string());
    return p;
}

}  // namespace rfl
