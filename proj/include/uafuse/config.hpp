#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "nn.hpp"
#include "phantom.hpp"
#include "train.hpp"

#ifndef UAFUSE_BUILD_ID
#define UAFUSE_BUILD_ID "unknown"
#endif

namespace uafuse {

inline constexpr const char* kVersion = "0.1.0";

namespace cfg_detail {

inline void require_known_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                               const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const auto& a : allowed)
            if (key == a) ok = true;
        if (!ok) throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
}

template <typename V>
inline void maybe(const nlohmann::json& j, const char* key, V& out) {
    if (j.contains(key)) out = j.at(key).get<V>();
}

inline void maybe_array3(const nlohmann::json& j, const char* key, std::array<int, 3>& out) {
    if (!j.contains(key)) return;
    auto v = j.at(key).get<std::vector<int>>();
    if (v.size() != 3) throw std::invalid_argument(std::string(key) + " must hold exactly 3 entries");
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
}

inline void maybe_array3f(const nlohmann::json& j, const char* key, std::array<float, 3>& out) {
    if (!j.contains(key)) return;
    auto v = j.at(key).get<std::vector<float>>();
    if (v.size() != 3) throw std::invalid_argument(std::string(key) + " must hold exactly 3 entries");
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
}

} // namespace cfg_detail

inline nlohmann::json to_json(const NetworkConfig& c) {
    return nlohmann::json{{"num_classes", c.num_classes},
                          {"num_modalities", c.num_modalities},
                          {"trunk_channels", c.trunk_channels},
                          {"adapt_channels", c.adapt_channels},
                          {"se_reduction", c.se_reduction},
                          {"dilations", c.dilations},
                          {"aspp_branch_channels", c.aspp_branch_channels},
                          {"blocks", c.blocks},
                          {"taps", c.taps},
                          {"min_input_dim", c.min_input_dim},
                          {"variant", to_string(c.variant)},
                          {"uncertainty_grad", c.uncertainty_grad}};
}

inline NetworkConfig network_config_from_json(const nlohmann::json& j) {
    cfg_detail::require_known_keys(j,
                                   {"num_classes", "num_modalities", "trunk_channels", "adapt_channels", "se_reduction",
                                    "dilations", "aspp_branch_channels", "blocks", "taps", "min_input_dim", "variant",
                                    "uncertainty_grad"},
                                   "network config");
    NetworkConfig c;
    cfg_detail::maybe(j, "num_classes", c.num_classes);
    cfg_detail::maybe(j, "num_modalities", c.num_modalities);
    cfg_detail::maybe(j, "trunk_channels", c.trunk_channels);
    cfg_detail::maybe(j, "adapt_channels", c.adapt_channels);
    cfg_detail::maybe(j, "se_reduction", c.se_reduction);
    cfg_detail::maybe(j, "dilations", c.dilations);
    cfg_detail::maybe(j, "aspp_branch_channels", c.aspp_branch_channels);
    cfg_detail::maybe(j, "blocks", c.blocks);
    cfg_detail::maybe(j, "taps", c.taps);
    cfg_detail::maybe(j, "min_input_dim", c.min_input_dim);
    if (j.contains("variant")) c.variant = model_variant_from_string(j.at("variant").get<std::string>());
    cfg_detail::maybe(j, "uncertainty_grad", c.uncertainty_grad);
    c.validate();
    return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
    return nlohmann::json{{"stage_switch_epoch", c.stage_switch_epoch},
                          {"total_epochs", c.total_epochs},
                          {"batch_size", c.batch_size},
                          {"learning_rate", c.learning_rate},
                          {"optimizer", c.optimizer},
                          {"seed", c.seed},
                          {"sampling", to_string(c.sampling)},
                          {"patch_size", std::vector<int>{c.patch_size[0], c.patch_size[1], c.patch_size[2]}},
                          {"stride", std::vector<int>{c.stride[0], c.stride[1], c.stride[2]}},
                          {"samples_per_epoch", c.samples_per_epoch},
                          {"val_interval", c.val_interval},
                          {"val_start_epoch", c.val_start_epoch},
                          {"val_stride", std::vector<int>{c.val_stride[0], c.val_stride[1], c.val_stride[2]}},
                          {"early_stop_dice", c.early_stop_dice},
                          {"val_cases", c.val_cases}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    cfg_detail::require_known_keys(j,
                                   {"stage_switch_epoch", "total_epochs", "batch_size", "learning_rate", "optimizer",
                                    "seed", "sampling", "patch_size", "stride", "samples_per_epoch", "val_interval",
                                    "val_start_epoch", "val_stride", "early_stop_dice", "val_cases"},
                                   "train config");
    TrainConfig c;
    cfg_detail::maybe(j, "stage_switch_epoch", c.stage_switch_epoch);
    cfg_detail::maybe(j, "total_epochs", c.total_epochs);
    cfg_detail::maybe(j, "batch_size", c.batch_size);
    cfg_detail::maybe(j, "learning_rate", c.learning_rate);
    cfg_detail::maybe(j, "optimizer", c.optimizer);
    cfg_detail::maybe(j, "seed", c.seed);
    if (j.contains("sampling")) c.sampling = sampling_mode_from_string(j.at("sampling").get<std::string>());
    cfg_detail::maybe_array3(j, "patch_size", c.patch_size);
    cfg_detail::maybe_array3(j, "stride", c.stride);
    cfg_detail::maybe(j, "samples_per_epoch", c.samples_per_epoch);
    cfg_detail::maybe(j, "val_interval", c.val_interval);
    cfg_detail::maybe(j, "val_start_epoch", c.val_start_epoch);
    cfg_detail::maybe_array3(j, "val_stride", c.val_stride);
    cfg_detail::maybe(j, "early_stop_dice", c.early_stop_dice);
    cfg_detail::maybe(j, "val_cases", c.val_cases);
    c.validate();
    return c;
}

/// Top-level experiment config: {"network": {...}, "train": {...}}.
struct ExperimentConfig {
    NetworkConfig network;
    TrainConfig train;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return nlohmann::json{{"network", to_json(c.network)}, {"train", to_json(c.train)}};
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    cfg_detail::require_known_keys(j, {"network", "train"}, "experiment config");
    ExperimentConfig c;
    if (j.contains("network")) c.network = network_config_from_json(j.at("network"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    return c;
}

inline nlohmann::json to_json(const PhantomSpec& s) {
    nlohmann::json j{{"dims", std::vector<int>{s.dims[0], s.dims[1], s.dims[2]}},
                     {"num_classes", s.num_classes},
                     {"spacing", std::vector<float>{s.spacing[0], s.spacing[1], s.spacing[2]}},
                     {"modality_names", s.modality_names},
                     {"blobs_per_class", s.blobs_per_class}};
    nlohmann::json contrast = nlohmann::json::array();
    for (const auto& table : s.contrast) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& e : table) rows.push_back(std::vector<float>{e[0], e[1]});
        contrast.push_back(rows);
    }
    j["contrast"] = contrast;
    if (s.has_corruption)
        j["corruption"] = nlohmann::json{
            {"modality", s.corruption.modality},
            {"mode", s.corruption.mode},
            {"center", std::vector<float>{s.corruption.center[0], s.corruption.center[1], s.corruption.center[2]}},
            {"radius", s.corruption.radius}};
    return j;
}

inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
    cfg_detail::require_known_keys(
        j, {"dims", "num_classes", "spacing", "modality_names", "contrast", "blobs_per_class", "corruption"},
        "phantom spec");
    PhantomSpec s = PhantomSpec::defaults();
    cfg_detail::maybe_array3(j, "dims", s.dims);
    cfg_detail::maybe(j, "num_classes", s.num_classes);
    cfg_detail::maybe_array3f(j, "spacing", s.spacing);
    cfg_detail::maybe(j, "modality_names", s.modality_names);
    cfg_detail::maybe(j, "blobs_per_class", s.blobs_per_class);
    if (j.contains("contrast")) {
        s.contrast.clear();
        for (const auto& table : j.at("contrast")) {
            std::vector<std::array<float, 2>> rows;
            for (const auto& e : table) {
                auto pair = e.get<std::vector<float>>();
                if (pair.size() != 2) throw std::invalid_argument("phantom spec: contrast entries are [mean, std]");
                rows.push_back({pair[0], pair[1]});
            }
            s.contrast.push_back(std::move(rows));
        }
    } else if (s.modality_names.size() != s.contrast.size() || s.num_classes != 5) {
        // defaults only cover the stock two-modality five-class phantom
        throw std::invalid_argument("phantom spec: a contrast table is required for non-default classes/modalities");
    }
    if (j.contains("corruption")) {
        const auto& c = j.at("corruption");
        cfg_detail::require_known_keys(c, {"modality", "mode", "center", "radius"}, "corruption spec");
        s.has_corruption = true;
        cfg_detail::maybe(c, "modality", s.corruption.modality);
        cfg_detail::maybe(c, "mode", s.corruption.mode);
        cfg_detail::maybe_array3f(c, "center", s.corruption.center);
        cfg_detail::maybe(c, "radius", s.corruption.radius);
    }
    s.validate();
    return s;
}

/// Written into every output directory before a command does real work.
inline nlohmann::json run_manifest(const std::string& command, const nlohmann::json& config_snapshot,
                                   std::uint64_t seed, const std::string& output_dir,
                                   const std::vector<std::string>& args) {
    return nlohmann::json{{"command", command}, {"config", config_snapshot}, {"seed", seed},
                          {"build", std::string(UAFUSE_BUILD_ID)}, {"version", kVersion},
                          {"output_dir", output_dir}, {"args", args}};
}

/// One metrics.jsonl record. Epochs are 0-based.
inline nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch},
                     {"stage", r.stage},
                     {"losses",
                      {{"modal1", r.loss_modal1}, {"modal2", r.loss_modal2}, {"final", r.loss_final}, {"total", r.total}}}};
    if (r.validated) {
        j["dice"] = r.val.per_class;
        j["mean_dice"] = r.val.mean_foreground;
    }
    return j;
}

} // namespace uafuse
