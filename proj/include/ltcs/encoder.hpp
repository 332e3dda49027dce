#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltcs/autodiff.hpp"

namespace ltcs {

// Forward-pass cost accounting. Owned by the caller; the model itself stays
// immutable and safe for concurrent reads.
struct OpCounters {
    std::uint64_t attention_score_evals = 0;  // one per (layer, head, i, j) score
    std::uint64_t initial_forward_items = 0;  // items pushed through the initial MLP
    std::uint64_t mlp_layer_applies = 0;      // linear layers applied, times rows
};

// One pre-norm encoder layer: per-head q/k/v projections, output projection,
// feed-forward pair, and two layer-norm gain/bias pairs.
template <typename T>
struct AttentionLayerParams {
    std::vector<NodePtr<T>> wq, wk, wv;  // heads entries, each d x d/heads
    NodePtr<T> wo, bo;
    NodePtr<T> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    NodePtr<T> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    std::size_t heads = 0;
    std::size_t model_width = 0;
};

template <typename T>
AttentionLayerParams<T> register_encoder_layer(ParamStore<T>& store, const std::string& prefix,
                                               std::size_t d, std::size_t heads,
                                               std::size_t ffn_hidden, Rng& rng) {
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("encoder layer " + prefix + ": width " + std::to_string(d) +
                          " not divisible by " + std::to_string(heads) + " heads");
    }
    const std::size_t dh = d / heads;
    AttentionLayerParams<T> p;
    p.heads = heads;
    p.model_width = d;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::string hp = prefix + ".h" + std::to_string(h);
        p.wq.push_back(store.add(hp + ".wq", init_linear<T>(d, dh, rng)));
        p.wk.push_back(store.add(hp + ".wk", init_linear<T>(d, dh, rng)));
        p.wv.push_back(store.add(hp + ".wv", init_linear<T>(d, dh, rng)));
    }
    p.wo = store.add(prefix + ".wo", init_linear<T>(d, d, rng));
    p.bo = store.add(prefix + ".bo", Tensor2<T>(1, d, T(0)));
    p.ln1_gain = store.add(prefix + ".ln1.gain", Tensor2<T>(1, d, T(1)));
    p.ln1_bias = store.add(prefix + ".ln1.bias", Tensor2<T>(1, d, T(0)));
    p.ln2_gain = store.add(prefix + ".ln2.gain", Tensor2<T>(1, d, T(1)));
    p.ln2_bias = store.add(prefix + ".ln2.bias", Tensor2<T>(1, d, T(0)));
    p.ffn_w1 = store.add(prefix + ".ffn.w1", init_linear<T>(d, ffn_hidden, rng));
    p.ffn_b1 = store.add(prefix + ".ffn.b1", Tensor2<T>(1, ffn_hidden, T(0)));
    p.ffn_w2 = store.add(prefix + ".ffn.w2", init_linear<T>(ffn_hidden, d, rng));
    p.ffn_b2 = store.add(prefix + ".ffn.b2", Tensor2<T>(1, d, T(0)));
    return p;
}

// Pre-norm encoder layer over a set of K embeddings. No mask, no positional
// signal: the layer is permutation-equivariant in its input rows.
template <typename T>
NodePtr<T> encoder_layer_forward(const NodePtr<T>& x, const AttentionLayerParams<T>& p,
                                 T smelu_beta, T ln_eps, OpCounters* counters = nullptr) {
    const std::size_t m = x->value.rows;
    const std::size_t d = x->value.cols;
    if (m == 0) throw ConfigError("encoder_layer_forward: empty input set");
    if (d != p.model_width) throw ConfigError("encoder_layer_forward: width mismatch");
    const std::size_t dh = d / p.heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));

    auto u = layer_norm_rows(x, p.ln1_gain, p.ln1_bias, ln_eps);
    NodePtr<T> heads_out;
    for (std::size_t h = 0; h < p.heads; ++h) {
        auto q = matmul(u, p.wq[h]);
        auto k = matmul(u, p.wk[h]);
        auto v = matmul(u, p.wv[h]);
        auto scores = scale(matmul(q, transpose(k)), inv_sqrt_dh);
        if (counters) counters->attention_score_evals += m * m;
        auto attn = softmax_rows(scores);
        auto head = matmul(attn, v);
        heads_out = h == 0 ? head : concat_cols(heads_out, head);
    }
    auto attn_out = add_row_bias(matmul(heads_out, p.wo), p.bo);
    auto x1 = add(x, attn_out);

    auto v2 = layer_norm_rows(x1, p.ln2_gain, p.ln2_bias, ln_eps);
    auto hidden = smelu_node(add_row_bias(matmul(v2, p.ffn_w1), p.ffn_b1), smelu_beta);
    auto ffn_out = add_row_bias(matmul(hidden, p.ffn_w2), p.ffn_b2);
    if (counters) counters->mlp_layer_applies += 2 * m;
    return add(x1, ffn_out);
}

template <typename T>
NodePtr<T> encoder_forward(const NodePtr<T>& x, const std::vector<AttentionLayerParams<T>>& layers,
                           T smelu_beta, T ln_eps, OpCounters* counters = nullptr) {
    NodePtr<T> h = x;
    for (const auto& layer : layers) {
        h = encoder_layer_forward(h, layer, smelu_beta, ln_eps, counters);
    }
    return h;
}

}  // namespace ltcs
