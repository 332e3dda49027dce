#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ltcs/errors.hpp"
#include "ltcs/json_util.hpp"

namespace ltcs {

enum class Precision : int { f32 = 32, f64 = 64 };

inline Precision precision_from_int(int bits) {
    if (bits == 32) return Precision::f32;
    if (bits == 64) return Precision::f64;
    throw ConfigError("precision must be 32 or 64, got " + std::to_string(bits));
}

// Architecture and model hyperparameters. The last initial hidden width is
// the embedding width d_e shared between the two rankers.
struct LtcsConfig {
    std::size_t query_feature_dim = 4;
    std::size_t item_feature_dim = 12;
    std::vector<std::size_t> initial_hidden_widths = {64, 32, 16};
    std::vector<std::size_t> rerank_hidden_widths = {32, 16};
    std::size_t encoder_layers = 2;
    std::size_t attention_heads = 2;
    std::size_t top_k = 10;
    double alpha = 0.5;
    double smelu_beta = 1.0;
    std::uint64_t seed = 7;
    Precision precision = Precision::f32;
    // Knobs the source architecture leaves open.
    std::size_t ffn_multiplier = 2;
    double layer_norm_eps = 1e-5;

    std::size_t embedding_dim() const {
        return initial_hidden_widths.empty() ? 0 : initial_hidden_widths.back();
    }

    std::size_t ffn_hidden_width() const { return embedding_dim() * ffn_multiplier; }

    void validate() const {
        if (query_feature_dim == 0) throw ConfigError("LtcsConfig: query_feature_dim must be >= 1");
        if (item_feature_dim == 0) throw ConfigError("LtcsConfig: item_feature_dim must be >= 1");
        if (initial_hidden_widths.empty())
            throw ConfigError("LtcsConfig: initial_hidden_widths must be non-empty");
        for (std::size_t w : initial_hidden_widths)
            if (w == 0) throw ConfigError("LtcsConfig: initial hidden widths must be >= 1");
        for (std::size_t w : rerank_hidden_widths)
            if (w == 0) throw ConfigError("LtcsConfig: rerank hidden widths must be >= 1");
        if (encoder_layers == 0) throw ConfigError("LtcsConfig: encoder_layers must be >= 1");
        if (attention_heads == 0) throw ConfigError("LtcsConfig: attention_heads must be >= 1");
        if (embedding_dim() % attention_heads != 0) {
            throw ConfigError("LtcsConfig: embedding width " + std::to_string(embedding_dim()) +
                              " not divisible by " + std::to_string(attention_heads) + " heads");
        }
        if (top_k == 0) throw ConfigError("LtcsConfig: top_k must be >= 1");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw ConfigError("LtcsConfig: alpha must lie in [0, 1], got " + std::to_string(alpha));
        if (!(smelu_beta > 0.0)) throw ConfigError("LtcsConfig: smelu_beta must be positive");
        if (ffn_multiplier == 0) throw ConfigError("LtcsConfig: ffn_multiplier must be >= 1");
        if (!(layer_norm_eps > 0.0)) throw ConfigError("LtcsConfig: layer_norm_eps must be positive");
    }

    // Desk-scale preset: CPU-trainable in minutes.
    static LtcsConfig desk() { return LtcsConfig{}; }

    // Production-scale preset: 2048/1024/512/256/64 initial MLP, 30 encoder
    // layers with 4 heads, 256/128/64 re-ranker MLP, top-40 re-ranking.
    // Used for construction/validation only; far too large for CPU training.
    static LtcsConfig paper() {
        LtcsConfig c;
        c.query_feature_dim = 64;
        c.item_feature_dim = 236;
        c.initial_hidden_widths = {2048, 1024, 512, 256, 64};
        c.rerank_hidden_widths = {256, 128, 64};
        c.encoder_layers = 30;
        c.attention_heads = 4;
        c.top_k = 40;
        c.alpha = 0.5;
        return c;
    }

    json to_json() const {
        json j;
        j["query_feature_dim"] = query_feature_dim;
        j["item_feature_dim"] = item_feature_dim;
        j["initial_hidden_widths"] = initial_hidden_widths;
        j["rerank_hidden_widths"] = rerank_hidden_widths;
        j["encoder_layers"] = encoder_layers;
        j["attention_heads"] = attention_heads;
        j["top_k"] = top_k;
        j["alpha"] = alpha;
        j["smelu_beta"] = smelu_beta;
        j["seed"] = seed;
        j["precision"] = static_cast<int>(precision);
        j["ffn_multiplier"] = ffn_multiplier;
        j["layer_norm_eps"] = layer_norm_eps;
        return j;
    }

    static LtcsConfig from_json(const json& j) {
        const std::string ctx = "LtcsConfig";
        reject_unknown_keys(j,
                            {"query_feature_dim", "item_feature_dim", "initial_hidden_widths",
                             "rerank_hidden_widths", "encoder_layers", "attention_heads", "top_k",
                             "alpha", "smelu_beta", "seed", "precision", "ffn_multiplier",
                             "layer_norm_eps"},
                            ctx);
        LtcsConfig c;
        c.query_feature_dim = optional_field<std::size_t>(j, "query_feature_dim", c.query_feature_dim, ctx);
        c.item_feature_dim = optional_field<std::size_t>(j, "item_feature_dim", c.item_feature_dim, ctx);
        c.initial_hidden_widths = optional_field<std::vector<std::size_t>>(
            j, "initial_hidden_widths", c.initial_hidden_widths, ctx);
        c.rerank_hidden_widths = optional_field<std::vector<std::size_t>>(
            j, "rerank_hidden_widths", c.rerank_hidden_widths, ctx);
        c.encoder_layers = optional_field<std::size_t>(j, "encoder_layers", c.encoder_layers, ctx);
        c.attention_heads = optional_field<std::size_t>(j, "attention_heads", c.attention_heads, ctx);
        c.top_k = optional_field<std::size_t>(j, "top_k", c.top_k, ctx);
        c.alpha = optional_field<double>(j, "alpha", c.alpha, ctx);
        c.smelu_beta = optional_field<double>(j, "smelu_beta", c.smelu_beta, ctx);
        c.seed = optional_field<std::uint64_t>(j, "seed", c.seed, ctx);
        c.precision = precision_from_int(optional_field<int>(j, "precision", static_cast<int>(c.precision), ctx));
        c.ffn_multiplier = optional_field<std::size_t>(j, "ffn_multiplier", c.ffn_multiplier, ctx);
        c.layer_norm_eps = optional_field<double>(j, "layer_norm_eps", c.layer_norm_eps, ctx);
        c.validate();
        return c;
    }
};

}  // namespace ltcs
