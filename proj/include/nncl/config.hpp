#pragma once

#include "nncl/backbone.hpp"
#include "nncl/embed.hpp"
#include "nncl/support.hpp"
#include "nncl/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace nncl {

/// Configuration error; the message names the offending key.
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string key, const std::string& what)
        : InvalidArgument("config key '" + key + "': " + what), key_(std::move(key))
    {
    }
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class LrSchedule { constant, cosine, step };
enum class HeadPositions { all, patches };

/// Every hyperparameter of a run. Defaults describe the desk-scale setup.
struct RunConfig {
    // window and patching
    Index lookback = 96;
    Index horizon = 24;
    Index patch_length = 16;
    Index patch_stride = 8;
    SeriesPooling series_pooling = SeriesPooling::patch_linear;
    HeadPositions head_positions = HeadPositions::all;

    // backbone
    Index width = 64;
    Index layers = 3;
    Index heads = 4;
    Index vocab_size = 1000;
    Index max_positions = 32;
    bool causal = true;
    double init_std = 0.02;
    std::string pretrained; // tensor archive with vocab/W and backbone/* tensors

    // prototypes and support set
    Index prototypes = 32;
    Index queue_size = 320;
    Index neighbors = 8;
    double tau = 0.1;
    NnclAggregation nncl_aggregation = NnclAggregation::mean;
    Index proto_vocab_sample = 0; // 0 = whole vocabulary every step

    // normalization
    bool revin_affine = true;
    double revin_eps = 1e-5;

    // objective and optimizer
    double lambda = 0.01;
    double learning_rate = 1e-3;
    LrSchedule lr_schedule = LrSchedule::constant;
    Index lr_step_size = 1000;
    double lr_gamma = 0.5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;

    // schedule
    Index batch_size = 16;
    Index epochs = 10;
    Index max_steps = 0; // 0 = no cap
    Index patience = 3;
    Index eval_every = 0; // 0 = once per epoch
    Index eval_stride = 1;
    std::uint64_t seed = 2024;
    double few_shot_fraction = 1.0;

    // ablations
    bool disable_nncl = false;
    bool disable_neighborhood_tctp = false;

    // data
    std::string split = "ratio_7_1_2";
    bool scale = true;
    bool forward_fill = false;

    Index patch_count() const;
    Index prompt_length() const;
    Index head_inputs() const;
    PatchConfig patch_config() const;
    BackboneConfig backbone_config() const;

    /// Throws ConfigError when a constraint between keys is violated.
    void validate() const;

    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_map() const;
    std::string to_text() const;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_map(const std::map<std::string, std::string>& values);
};

} // namespace nncl
