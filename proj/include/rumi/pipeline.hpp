#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rumi/dataset.hpp"
#include "rumi/errors.hpp"
#include "rumi/image.hpp"
#include "rumi/metrics.hpp"
#include "rumi/nn.hpp"
#include "rumi/rankpool.hpp"

namespace rumi::cli {

struct PathsConfig {
    std::string frames_dir;
    std::string manifest;
    std::string out_dir;
};

struct PreprocessConfig {
    int resize_width = 224;
    int resize_height = 224;
    img::Interp interp = img::Interp::Bilinear;
    double brightness_lo = 0.7;
    double brightness_hi = 1.3;
    double gamma = 0.5;
    int multiplier = 1;  // manifest entries per base clip after augmentation
};

struct RankPoolSection {
    rankpool::RankPoolConfig solver;
    bool smooth = true;
    std::string method = "exact";  // "exact" | "approx"
};

struct DatasetSection {
    int T = 25;
    int stride = 0;  // 0 means "same as T"
    int clips_periodic = 10;
    int clips_drift = 5;
    int clips_static = 5;
    int frame_width = 64;
    int frame_height = 64;
    int channels = 3;
    double noise = 0.01;
    double test_fraction = 0.21;
};

struct EvalSection {
    int folds = 10;
    data::Label positive = data::Label::Ruminating;
};

struct PipelineConfig {
    std::uint64_t seed = 42;
    unsigned jobs = 0;  // 0 = hardware concurrency
    PathsConfig paths;
    PreprocessConfig preprocess;
    RankPoolSection rankpool;
    DatasetSection dataset;
    nn::TrainConfig train;
    EvalSection eval;

    int stride() const { return dataset.stride > 0 ? dataset.stride : dataset.T; }
};

// Parses the JSON config document; missing fields take defaults, bad values
// raise ValidationError.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json_text(const std::string& text, const std::string& origin);

// Renders synthetic clips and writes per-source frame directories plus the
// JSONL manifest with stratified train/test splits.
void cmd_synth(const PipelineConfig& cfg);

// Pools every manifest entry (augmented variants included) into a dynamic
// image PNG plus a JSON sidecar. Entries whose source runs out of frames
// are skipped with a warning and recorded in pooled/skipped.jsonl.
void cmd_pool(const PipelineConfig& cfg);

// Trains the classifier on the pooled train split (test split serves as
// the validation set) and writes model.dnw and train_trace.csv.
void cmd_train(const PipelineConfig& cfg);

// Evaluates model.dnw on the pooled test split; writes eval_report.json
// and roc.csv.
void cmd_eval(const PipelineConfig& cfg);

// k-fold cross-validation over all pooled images; writes crossval.json.
void cmd_crossval(const PipelineConfig& cfg);

// Derived artifact locations.
std::string pooled_dir(const PipelineConfig& cfg);
std::string pooled_basename(const data::LabeledClip& entry);
std::string weights_path(const PipelineConfig& cfg);
std::string trace_path(const PipelineConfig& cfg);
std::string report_path(const PipelineConfig& cfg);
std::string roc_path(const PipelineConfig& cfg);
std::string crossval_path(const PipelineConfig& cfg);
std::string skip_log_path(const PipelineConfig& cfg);

}  // namespace rumi::cli
