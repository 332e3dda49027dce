#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "ltcs/autodiff.hpp"
#include "ltcs/config.hpp"
#include "ltcs/data.hpp"
#include "ltcs/encoder.hpp"

namespace ltcs {

template <typename T>
struct RankerOutputs {
    std::vector<T> initial_logits;           // length n
    Tensor2<T> embeddings;                   // n x d_e
    std::vector<std::size_t> top_k_indices;  // min(K, n), initial-logit desc / index asc
    Tensor2<T> context_embeddings;           // min(K, n) x d_e
    std::vector<T> rerank_logits;            // min(K, n)
    std::vector<std::size_t> final_ranking;  // permutation of all n indices
};

// Graph-level handle used by the training loop.
template <typename T>
struct ForwardGraph {
    NodePtr<T> initial_logits;  // n x 1
    NodePtr<T> embeddings;      // n x d_e
    std::vector<std::size_t> selected;
    NodePtr<T> rerank_logits;   // m x 1
};

template <typename T>
struct ForwardOptions {
    bool detach_embeddings = false;
    // Training may override the natural top-K selection (guided top-K).
    const std::vector<std::size_t>* override_selection = nullptr;
    OpCounters* counters = nullptr;
};

// Descending by score, ties broken by ascending index. Deterministic for
// every input, which keeps rankings reproducible bit-for-bit.
template <typename T>
std::vector<std::size_t> sort_desc_tie_index(const std::vector<T>& scores,
                                             std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end(), [&scores](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return indices;
}

template <typename T>
std::vector<std::size_t> select_top_k(const std::vector<T>& initial_logits, std::size_t k) {
    if (k == 0) throw ConfigError("select_top_k: k must be >= 1");
    std::vector<std::size_t> all(initial_logits.size());
    std::iota(all.begin(), all.end(), 0);
    auto sorted = sort_desc_tie_index(initial_logits, std::move(all));
    if (sorted.size() > k) sorted.resize(k);
    return sorted;
}

// The co-trained two-stage ranker: a pointwise MLP producing a logit and a
// last-hidden-layer embedding per item, and a set-wise re-ranker that runs an
// encoder-only transformer over the top-K embeddings. Parameters are shared
// across items and immutable outside the training loop.
template <typename T>
class LtcsModel {
public:
    explicit LtcsModel(const LtcsConfig& config) : config_(config) {
        config_.validate();
        Rng rng(config_.seed);
        const std::size_t in_dim = config_.query_feature_dim + config_.item_feature_dim;
        std::size_t prev = in_dim;
        for (std::size_t l = 0; l < config_.initial_hidden_widths.size(); ++l) {
            const std::size_t width = config_.initial_hidden_widths[l];
            const std::string prefix = "initial.l" + std::to_string(l);
            initial_w_.push_back(store_.add(prefix + ".w", init_linear<T>(prev, width, rng)));
            initial_b_.push_back(store_.add(prefix + ".b", Tensor2<T>(1, width, T(0))));
            prev = width;
        }
        // Bias-free logit head: the embedding fully determines the logit.
        initial_logit_w_ = store_.add("initial.logit.w", init_linear<T>(prev, 1, rng));

        const std::size_t d = config_.embedding_dim();
        for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
            encoder_.push_back(register_encoder_layer<T>(store_, "encoder.l" + std::to_string(l), d,
                                                         config_.attention_heads,
                                                         config_.ffn_hidden_width(), rng));
        }

        prev = 2 * d;  // concat(item embedding, context embedding)
        for (std::size_t l = 0; l < config_.rerank_hidden_widths.size(); ++l) {
            const std::size_t width = config_.rerank_hidden_widths[l];
            const std::string prefix = "rerank.l" + std::to_string(l);
            rerank_w_.push_back(store_.add(prefix + ".w", init_linear<T>(prev, width, rng)));
            rerank_b_.push_back(store_.add(prefix + ".b", Tensor2<T>(1, width, T(0))));
            prev = width;
        }
        rerank_head_w_ = store_.add("rerank.head.w", init_linear<T>(prev, 1, rng));
        rerank_head_b_ = store_.add("rerank.head.b", Tensor2<T>(1, 1, T(0)));
    }

    const LtcsConfig& config() const { return config_; }
    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }
    std::size_t parameter_count() const { return store_.parameter_count(); }

    // Rows are concat(query_features, item_features), one per candidate.
    Tensor2<T> build_features(const QueryGroup& group) const {
        group.validate(config_.query_feature_dim, config_.item_feature_dim, false);
        const std::size_t n = group.size();
        const std::size_t qd = config_.query_feature_dim;
        const std::size_t id = config_.item_feature_dim;
        Tensor2<T> x(n, qd + id);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t f = 0; f < qd; ++f) x(j, f) = static_cast<T>(group.query_features[f]);
            for (std::size_t f = 0; f < id; ++f)
                x(j, qd + f) = static_cast<T>(group.items[j].features[f]);
        }
        return x;
    }

    // Pointwise ranker over a batch of rows. Every item shares the same
    // parameters; the embedding is the activation of the last hidden layer
    // and the logit is a bias-free linear map from it.
    struct InitialGraph {
        NodePtr<T> logits;      // n x 1
        NodePtr<T> embeddings;  // n x d_e
    };

    InitialGraph initial_forward_graph(const NodePtr<T>& features,
                                       OpCounters* counters = nullptr) const {
        if (features->value.cols != config_.query_feature_dim + config_.item_feature_dim) {
            throw ConfigError("initial_forward: feature width " + std::to_string(features->value.cols) +
                              " does not match configured " +
                              std::to_string(config_.query_feature_dim + config_.item_feature_dim));
        }
        NodePtr<T> h = features;
        for (std::size_t l = 0; l < initial_w_.size(); ++l) {
            h = smelu_node(add_row_bias(matmul(h, initial_w_[l]), initial_b_[l]),
                           static_cast<T>(config_.smelu_beta));
        }
        if (counters) {
            counters->initial_forward_items += features->value.rows;
            counters->mlp_layer_applies += initial_w_.size() * features->value.rows;
        }
        return {matmul(h, initial_logit_w_), h};
    }

    struct InitialResult {
        T logit;
        std::vector<T> embedding;
    };

    InitialResult initial_forward(const std::vector<T>& query_features,
                                  const std::vector<T>& item_features,
                                  OpCounters* counters = nullptr) const {
        if (query_features.size() != config_.query_feature_dim ||
            item_features.size() != config_.item_feature_dim) {
            throw ConfigError("initial_forward: feature dims do not match config");
        }
        Tensor2<T> x(1, query_features.size() + item_features.size());
        for (std::size_t f = 0; f < query_features.size(); ++f) x(0, f) = query_features[f];
        for (std::size_t f = 0; f < item_features.size(); ++f)
            x(0, query_features.size() + f) = item_features[f];
        auto g = initial_forward_graph(make_constant<T>(std::move(x)), counters);
        return {g.logits->value.data[0], g.embeddings->value.data};
    }

    struct RerankGraph {
        NodePtr<T> context;  // m x d_e
        NodePtr<T> logits;   // m x 1
    };

    // Set-wise re-ranker: encoder over the m embeddings (no positional
    // signal), then an MLP over concat(own embedding, context embedding).
    RerankGraph rerank_forward_graph(const NodePtr<T>& top_embeddings,
                                     OpCounters* counters = nullptr) const {
        if (top_embeddings->value.rows == 0) {
            throw ConfigError("rerank_forward: empty embedding set");
        }
        if (top_embeddings->value.cols != config_.embedding_dim()) {
            throw ConfigError("rerank_forward: embedding width mismatch");
        }
        auto context = encoder_forward(top_embeddings, encoder_, static_cast<T>(config_.smelu_beta),
                                       static_cast<T>(config_.layer_norm_eps), counters);
        NodePtr<T> h = concat_cols(top_embeddings, context);
        for (std::size_t l = 0; l < rerank_w_.size(); ++l) {
            h = smelu_node(add_row_bias(matmul(h, rerank_w_[l]), rerank_b_[l]),
                           static_cast<T>(config_.smelu_beta));
        }
        if (counters) {
            counters->mlp_layer_applies += (rerank_w_.size() + 1) * top_embeddings->value.rows;
        }
        return {context, add_row_bias(matmul(h, rerank_head_w_), rerank_head_b_)};
    }

    std::vector<T> rerank_forward(const Tensor2<T>& top_embeddings,
                                  OpCounters* counters = nullptr) const {
        auto g = rerank_forward_graph(make_constant<T>(top_embeddings), counters);
        return g.logits->value.data;
    }

    ForwardGraph<T> full_forward_graph(const QueryGroup& group, std::size_t k,
                                       const ForwardOptions<T>& opts = {}) const {
        auto features = make_constant<T>(build_features(group));
        auto initial = initial_forward_graph(features, opts.counters);
        std::vector<std::size_t> selected =
            opts.override_selection ? *opts.override_selection
                                    : select_top_k(initial.logits->value.data, k);
        auto picked = gather_rows(initial.embeddings, selected, opts.detach_embeddings);
        auto rerank = rerank_forward_graph(picked, opts.counters);
        return {initial.logits, initial.embeddings, std::move(selected), rerank.logits};
    }

    // Full inference pass. Final ranking: the re-ranked block ordered by
    // re-rank logit, then the remaining candidates in initial-logit order.
    RankerOutputs<T> full_forward(const QueryGroup& group, std::size_t k,
                                  OpCounters* counters = nullptr) const {
        auto features = make_constant<T>(build_features(group));
        auto initial = initial_forward_graph(features, counters);
        RankerOutputs<T> out;
        out.initial_logits = initial.logits->value.data;
        out.embeddings = initial.embeddings->value;
        out.top_k_indices = select_top_k(out.initial_logits, k);
        auto picked = gather_rows(initial.embeddings, out.top_k_indices, false);
        auto rerank = rerank_forward_graph(picked, counters);
        out.context_embeddings = rerank.context->value;
        out.rerank_logits = rerank.logits->value.data;
        out.final_ranking = compose_final_ranking(out.initial_logits, out.top_k_indices,
                                                  out.rerank_logits);
        return out;
    }

    static std::vector<std::size_t> compose_final_ranking(
        const std::vector<T>& initial_logits, const std::vector<std::size_t>& top_k_indices,
        const std::vector<T>& rerank_logits) {
        const std::size_t n = initial_logits.size();
        const std::size_t m = top_k_indices.size();
        if (rerank_logits.size() != m) {
            throw ConfigError("compose_final_ranking: rerank logits length mismatch");
        }
        // Re-ranked block: sort selected items by rerank logit, ties by item index.
        std::vector<std::size_t> block(m);
        std::iota(block.begin(), block.end(), 0);
        std::sort(block.begin(), block.end(), [&](std::size_t a, std::size_t b) {
            if (rerank_logits[a] != rerank_logits[b]) return rerank_logits[a] > rerank_logits[b];
            return top_k_indices[a] < top_k_indices[b];
        });
        std::vector<std::size_t> ranking;
        ranking.reserve(n);
        for (std::size_t pos : block) ranking.push_back(top_k_indices[pos]);
        // Tail keeps its initial order.
        std::vector<bool> in_block(n, false);
        for (std::size_t idx : top_k_indices) in_block[idx] = true;
        std::vector<std::size_t> tail_sorted;
        for (std::size_t j = 0; j < n; ++j)
            if (!in_block[j]) tail_sorted.push_back(j);
        std::sort(tail_sorted.begin(), tail_sorted.end(), [&](std::size_t a, std::size_t b) {
            if (initial_logits[a] != initial_logits[b]) return initial_logits[a] > initial_logits[b];
            return a < b;
        });
        for (std::size_t idx : tail_sorted) ranking.push_back(idx);
        return ranking;
    }

private:
    LtcsConfig config_;
    ParamStore<T> store_;
    std::vector<NodePtr<T>> initial_w_, initial_b_;
    NodePtr<T> initial_logit_w_;
    std::vector<AttentionLayerParams<T>> encoder_;
    std::vector<NodePtr<T>> rerank_w_, rerank_b_;
    NodePtr<T> rerank_head_w_, rerank_head_b_;
};

}  // namespace ltcs
