#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ltcs/config.hpp"
#include "ltcs/errors.hpp"
#include "ltcs/json_util.hpp"

namespace ltcs {

struct Item {
    std::uint64_t item_id = 0;
    std::vector<double> features;
};

// One query with its candidate items and binary booking labels; the unit of
// listwise training and evaluation.
struct QueryGroup {
    std::uint64_t query_id = 0;
    std::vector<double> query_features;
    std::vector<Item> items;
    std::vector<int> labels;

    std::size_t size() const { return items.size(); }

    int positive_index() const {
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (labels[j] == 1) return static_cast<int>(j);
        return -1;
    }

    void validate(std::size_t query_dim, std::size_t item_dim, bool require_one_positive) const {
        if (labels.size() != items.size()) {
            throw DataError("query " + std::to_string(query_id) + ": labels length " +
                            std::to_string(labels.size()) + " != items length " +
                            std::to_string(items.size()));
        }
        if (query_features.size() != query_dim) {
            throw DataError("query " + std::to_string(query_id) + ": query feature dim " +
                            std::to_string(query_features.size()) + " != " + std::to_string(query_dim));
        }
        int positives = 0;
        for (std::size_t j = 0; j < items.size(); ++j) {
            if (items[j].features.size() != item_dim) {
                throw DataError("query " + std::to_string(query_id) + " item " + std::to_string(j) +
                                ": feature dim " + std::to_string(items[j].features.size()) +
                                " != " + std::to_string(item_dim));
            }
            if (labels[j] != 0 && labels[j] != 1) {
                throw DataError("query " + std::to_string(query_id) + ": label must be 0 or 1");
            }
            positives += labels[j];
        }
        if (require_one_positive && positives != 1) {
            throw DataError("query " + std::to_string(query_id) + ": expected exactly one positive, got " +
                            std::to_string(positives));
        }
    }
};

using Dataset = std::vector<QueryGroup>;

inline constexpr int kDatasetFormatVersion = 1;

inline json query_group_to_json(const QueryGroup& g) {
    json j;
    j["query_id"] = g.query_id;
    j["query_features"] = g.query_features;
    json items = json::array();
    for (const auto& item : g.items) {
        json ji;
        ji["item_id"] = item.item_id;
        ji["features"] = item.features;
        items.push_back(std::move(ji));
    }
    j["items"] = std::move(items);
    j["labels"] = g.labels;
    return j;
}

inline QueryGroup query_group_from_json(const json& j) {
    const std::string ctx = "dataset record";
    reject_unknown_keys(j, {"query_id", "query_features", "items", "labels"}, ctx);
    QueryGroup g;
    g.query_id = require_field<std::uint64_t>(j, "query_id", ctx);
    g.query_features = require_field<std::vector<double>>(j, "query_features", ctx);
    for (const auto& ji : require_field<json>(j, "items", ctx)) {
        reject_unknown_keys(ji, {"item_id", "features"}, ctx + " item");
        Item item;
        item.item_id = require_field<std::uint64_t>(ji, "item_id", ctx + " item");
        item.features = require_field<std::vector<double>>(ji, "features", ctx + " item");
        g.items.push_back(std::move(item));
    }
    g.labels = require_field<std::vector<int>>(j, "labels", ctx);
    return g;
}

// Line-delimited text format: a header line carrying the generator
// configuration, then one record per query.
inline void save_dataset(std::ostream& out, const Dataset& dataset, const json& world_config) {
    json header;
    header["format"] = "ltcs-dataset";
    header["version"] = kDatasetFormatVersion;
    header["world_config"] = world_config;
    out << header.dump() << "\n";
    for (const auto& g : dataset) out << query_group_to_json(g).dump() << "\n";
}

inline void save_dataset(const std::string& path, const Dataset& dataset, const json& world_config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    save_dataset(out, dataset, world_config);
}

struct LoadedDataset {
    json world_config;
    Dataset groups;
};

inline LoadedDataset load_dataset(std::istream& in, const std::string& origin = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty dataset file");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(origin + ": bad header line: " + e.what());
    }
    if (optional_field<std::string>(header, "format", "", "dataset header") != "ltcs-dataset") {
        throw DataError(origin + ": not an ltcs dataset file");
    }
    const int version = require_field<int>(header, "version", "dataset header");
    if (version != kDatasetFormatVersion) {
        throw DataError(origin + ": unsupported dataset version " + std::to_string(version) +
                        " (expected " + std::to_string(kDatasetFormatVersion) + ")");
    }
    LoadedDataset result;
    result.world_config = require_field<json>(header, "world_config", "dataset header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            result.groups.push_back(query_group_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return result;
}

inline LoadedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    return load_dataset(in, path);
}

}  // namespace ltcs
