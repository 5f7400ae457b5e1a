#include "rumi/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "rumi/image_io.hpp"
#include "rumi/parallel.hpp"
#include "rumi/rng.hpp"

namespace fs = std::filesystem;

namespace rumi::cli {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

int class_index(data::Label l) { return l == data::Label::Ruminating ? 0 : 1; }

}  // namespace

PipelineConfig config_from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(origin + ": " + e.what());
    }
    PipelineConfig cfg;
    cfg.seed = field<std::uint64_t>(j, "seed", cfg.seed);
    cfg.jobs = field<unsigned>(j, "jobs", cfg.jobs);

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        cfg.paths.frames_dir = field<std::string>(p, "frames_dir", "");
        cfg.paths.manifest = field<std::string>(p, "manifest", "");
        cfg.paths.out_dir = field<std::string>(p, "out_dir", "");
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        cfg.preprocess.resize_width = field<int>(p, "resize_width", cfg.preprocess.resize_width);
        cfg.preprocess.resize_height =
            field<int>(p, "resize_height", cfg.preprocess.resize_height);
        const std::string interp = field<std::string>(p, "interp", "bilinear");
        if (interp == "bilinear") {
            cfg.preprocess.interp = img::Interp::Bilinear;
        } else if (interp == "nearest") {
            cfg.preprocess.interp = img::Interp::Nearest;
        } else {
            throw ValidationError("preprocess.interp must be 'bilinear' or 'nearest'");
        }
        if (p.contains("brightness_range")) {
            const auto& r = p.at("brightness_range");
            require(r.is_array() && r.size() == 2, "preprocess.brightness_range must be [lo, hi]");
            cfg.preprocess.brightness_lo = r.at(0).get<double>();
            cfg.preprocess.brightness_hi = r.at(1).get<double>();
        }
        cfg.preprocess.gamma = field<double>(p, "gamma", cfg.preprocess.gamma);
        cfg.preprocess.multiplier = field<int>(p, "multiplier", cfg.preprocess.multiplier);
    }
    if (j.contains("rankpool")) {
        const auto& p = j.at("rankpool");
        cfg.rankpool.solver.lambda = field<double>(p, "lambda", cfg.rankpool.solver.lambda);
        cfg.rankpool.solver.max_iters = field<int>(p, "max_iters", cfg.rankpool.solver.max_iters);
        cfg.rankpool.solver.step_size =
            field<double>(p, "step_size", cfg.rankpool.solver.step_size);
        cfg.rankpool.solver.tol = field<double>(p, "tol", cfg.rankpool.solver.tol);
        cfg.rankpool.smooth = field<bool>(p, "smooth", cfg.rankpool.smooth);
        cfg.rankpool.method = field<std::string>(p, "solver", cfg.rankpool.method);
    }
    if (j.contains("dataset")) {
        const auto& p = j.at("dataset");
        cfg.dataset.T = field<int>(p, "T", cfg.dataset.T);
        cfg.dataset.stride = field<int>(p, "stride", cfg.dataset.stride);
        cfg.dataset.clips_periodic = field<int>(p, "clips_periodic", cfg.dataset.clips_periodic);
        cfg.dataset.clips_drift = field<int>(p, "clips_drift", cfg.dataset.clips_drift);
        cfg.dataset.clips_static = field<int>(p, "clips_static", cfg.dataset.clips_static);
        cfg.dataset.frame_width = field<int>(p, "frame_width", cfg.dataset.frame_width);
        cfg.dataset.frame_height = field<int>(p, "frame_height", cfg.dataset.frame_height);
        cfg.dataset.channels = field<int>(p, "channels", cfg.dataset.channels);
        cfg.dataset.noise = field<double>(p, "noise", cfg.dataset.noise);
        cfg.dataset.test_fraction = field<double>(p, "test_fraction", cfg.dataset.test_fraction);
    }
    if (j.contains("train")) {
        const auto& p = j.at("train");
        cfg.train.lr0 = field<double>(p, "lr0", cfg.train.lr0);
        cfg.train.k = field<double>(p, "k", cfg.train.k);
        cfg.train.batch_size = field<int>(p, "batch_size", cfg.train.batch_size);
        cfg.train.dropout_p = field<double>(p, "dropout", cfg.train.dropout_p);
        cfg.train.max_epochs = field<int>(p, "max_epochs", cfg.train.max_epochs);
        cfg.train.patience = field<int>(p, "patience", cfg.train.patience);
        cfg.train.per_step_schedule =
            field<bool>(p, "per_step_schedule", cfg.train.per_step_schedule);
    }
    if (j.contains("eval")) {
        const auto& p = j.at("eval");
        cfg.eval.folds = field<int>(p, "folds", cfg.eval.folds);
        const std::string pos = field<std::string>(p, "positive", "Ruminating");
        cfg.eval.positive = data::label_from_string(pos);
    }
    cfg.train.seed = cfg.seed;

    // Fail fast on values no command could accept.
    require(!cfg.paths.out_dir.empty(), "paths.out_dir must be set");
    require(!cfg.paths.frames_dir.empty(), "paths.frames_dir must be set");
    require(!cfg.paths.manifest.empty(), "paths.manifest must be set");
    require(cfg.dataset.T >= 2, "dataset.T must be at least 2");
    require(cfg.dataset.stride >= 0, "dataset.stride must be non-negative");
    require(cfg.preprocess.resize_width >= 4 && cfg.preprocess.resize_height >= 4,
            "preprocess resize target must be at least 4x4");
    require(cfg.preprocess.multiplier >= 1, "preprocess.multiplier must be at least 1");
    require(cfg.preprocess.brightness_lo > 0.0 &&
                cfg.preprocess.brightness_hi >= cfg.preprocess.brightness_lo,
            "preprocess.brightness_range must be positive and ordered");
    require(cfg.preprocess.gamma > 0.0, "preprocess.gamma must be positive");
    require(cfg.rankpool.solver.lambda > 0.0, "rankpool.lambda must be positive");
    require(cfg.rankpool.solver.max_iters >= 1, "rankpool.max_iters must be at least 1");
    require(cfg.rankpool.solver.step_size > 0.0, "rankpool.step_size must be positive");
    require(cfg.rankpool.solver.tol >= 0.0, "rankpool.tol must be non-negative");
    require(cfg.rankpool.method == "exact" || cfg.rankpool.method == "approx",
            "rankpool.solver must be 'exact' or 'approx'");
    require(cfg.dataset.clips_periodic >= 0 && cfg.dataset.clips_drift >= 0 &&
                cfg.dataset.clips_static >= 0,
            "clip counts must be non-negative");
    require(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0,
            "dataset.test_fraction must lie strictly between 0 and 1");
    require(cfg.dataset.channels == 1 || cfg.dataset.channels == 3,
            "dataset.channels must be 1 or 3");
    require(cfg.train.lr0 > 0.0, "train.lr0 must be positive");
    require(cfg.train.batch_size >= 1, "train.batch_size must be at least 1");
    require(cfg.train.dropout_p >= 0.0 && cfg.train.dropout_p < 1.0,
            "train.dropout must lie in [0, 1)");
    require(cfg.train.max_epochs >= 1, "train.max_epochs must be at least 1");
    require(cfg.train.patience >= 0, "train.patience must be non-negative");
    require(cfg.eval.folds >= 2, "eval.folds must be at least 2");
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text, path);
}

std::string pooled_dir(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "pooled").string();
}

std::string pooled_basename(const data::LabeledClip& entry) {
    return entry.source_id + "_s" + std::to_string(entry.start) + "_a" +
           std::to_string(entry.aug);
}

std::string weights_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "model.dnw").string();
}

std::string trace_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "train_trace.csv").string();
}

std::string report_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "eval_report.json").string();
}

std::string roc_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "roc.csv").string();
}

std::string crossval_path(const PipelineConfig& cfg) {
    return (fs::path(cfg.paths.out_dir) / "crossval.json").string();
}

std::string skip_log_path(const PipelineConfig& cfg) {
    return (fs::path(pooled_dir(cfg)) / "skipped.jsonl").string();
}

// ---- synth ----

void cmd_synth(const PipelineConfig& cfg) {
    data::SynthParams sp;
    sp.T = cfg.dataset.T;
    sp.width = cfg.dataset.frame_width;
    sp.height = cfg.dataset.frame_height;
    sp.channels = cfg.dataset.channels;
    sp.noise = cfg.dataset.noise;
    if (sp.width < 8 || sp.height < 8) {
        throw ValidationError("dataset.frame_width/height must be at least 8");
    }

    std::error_code ec;
    fs::create_directories(cfg.paths.frames_dir, ec);
    if (ec) throw IoError("cannot create frames dir: " + cfg.paths.frames_dir);
    const fs::path manifest_dir = fs::path(cfg.paths.manifest).parent_path();
    if (!manifest_dir.empty()) fs::create_directories(manifest_dir, ec);

    struct KindPlan {
        data::SynthKind kind;
        int count;
    };
    const KindPlan plan[3] = {{data::SynthKind::Periodic, cfg.dataset.clips_periodic},
                              {data::SynthKind::Drift, cfg.dataset.clips_drift},
                              {data::SynthKind::Static, cfg.dataset.clips_static}};

    struct Job {
        data::SynthKind kind;
        std::string source_id;
    };
    std::vector<Job> jobs_list;
    for (const auto& kp : plan) {
        for (int i = 0; i < kp.count; ++i) {
            char id[64];
            std::snprintf(id, sizeof(id), "%s_%03d", data::to_string(kp.kind), i);
            jobs_list.push_back({kp.kind, id});
        }
    }

    data::Manifest manifest;
    manifest.T = cfg.dataset.T;
    manifest.entries.resize(jobs_list.size());

    parallel_for(jobs_list.size(), cfg.jobs, [&](std::size_t i) {
        const Job& job = jobs_list[i];
        const auto clip = data::synth_clip(job.kind, sp, derive_seed(cfg.seed, 0xc11b,
                                                                     fnv1a(job.source_id)));
        const fs::path dir = fs::path(cfg.paths.frames_dir) / job.source_id;
        std::error_code dir_ec;
        fs::create_directories(dir, dir_ec);
        if (dir_ec) throw IoError("cannot create source dir: " + dir.string());
        for (std::size_t t = 0; t < clip.frames.size(); ++t) {
            img::save(clip.frames[t], (dir / data::frame_file_name(static_cast<int>(t))).string());
        }
        // One windowed entry per synthetic source (sources are exactly T long).
        const auto starts = data::window(static_cast<int>(clip.frames.size()), cfg.dataset.T,
                                         cfg.stride());
        data::LabeledClip entry;
        entry.source_id = job.source_id;
        entry.start = starts.empty() ? 0 : starts.front();
        entry.T = cfg.dataset.T;
        entry.label = clip.label;
        manifest.entries[i] = entry;
    });

    if (!manifest.entries.empty()) {
        manifest = data::split_manifest(manifest, cfg.dataset.test_fraction,
                                        derive_seed(cfg.seed, 0x5b17));
    }
    data::save_manifest(manifest, cfg.paths.manifest);
}

// ---- pool ----

namespace {

struct SkipRecord {
    std::string name;
    std::string reason;
};

const char* aug_transform_name(int aug) {
    if (aug == 0) return "none";
    switch ((aug - 1) % 3) {
        case 0: return "negative";
        case 1: return "gamma";
        default: return "brightness";
    }
}

img::Frame apply_augmentation(img::Frame frame, int aug, const PreprocessConfig& pp, Rng& rng) {
    switch ((aug - 1) % 3) {
        case 0: return img::negative(frame);
        case 1: return img::gamma_correct(frame, pp.gamma);
        default:
            return img::adjust_brightness(frame,
                                          rng.uniform(pp.brightness_lo, pp.brightness_hi));
    }
}

}  // namespace

void cmd_pool(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.paths.manifest)) {
        throw IoError("manifest not found: " + cfg.paths.manifest);
    }
    if (!fs::is_directory(cfg.paths.frames_dir)) {
        throw IoError("frames directory not found: " + cfg.paths.frames_dir);
    }
    data::Manifest manifest = data::load_manifest(cfg.paths.manifest);
    if (!manifest.entries.empty() && manifest.T != cfg.dataset.T) {
        throw ValidationError("manifest T = " + std::to_string(manifest.T) +
                              " disagrees with config dataset.T = " +
                              std::to_string(cfg.dataset.T));
    }
    manifest = data::expand_augmented(manifest, cfg.preprocess.multiplier);

    std::error_code ec;
    fs::create_directories(pooled_dir(cfg), ec);
    if (ec) throw IoError("cannot create pooled dir: " + pooled_dir(cfg));

    std::vector<std::optional<SkipRecord>> skips(manifest.entries.size());

    parallel_for(manifest.entries.size(), cfg.jobs, [&](std::size_t i) {
        const data::LabeledClip& entry = manifest.entries[i];
        const std::string name = pooled_basename(entry);
        const fs::path src_dir = fs::path(cfg.paths.frames_dir) / entry.source_id;
        if (!fs::is_directory(src_dir)) {
            throw DataError("entry " + name + ": missing frames directory " + src_dir.string());
        }

        // A source that runs out of frames is a short clip: skip, not fail.
        std::vector<std::string> frame_paths;
        frame_paths.reserve(static_cast<std::size_t>(entry.T));
        for (int t = 0; t < entry.T; ++t) {
            fs::path p = src_dir / data::frame_file_name(entry.start + t);
            if (!fs::exists(p)) {
                skips[i] = SkipRecord{name, "clip shorter than T: missing frame " +
                                                data::frame_file_name(entry.start + t)};
                return;
            }
            frame_paths.push_back(p.string());
        }

        Rng aug_rng(derive_seed(cfg.seed, fnv1a(entry.source_id + ":" +
                                                std::to_string(entry.start)),
                                static_cast<std::uint64_t>(entry.aug)));
        std::vector<img::Frame> clip;
        clip.reserve(frame_paths.size());
        for (const auto& p : frame_paths) {
            img::Frame f = img::load(p);
            if (entry.crop) {
                f = img::crop(f, *entry.crop);
            }
            f = img::resize(f, cfg.preprocess.resize_width, cfg.preprocess.resize_height,
                            cfg.preprocess.interp);
            if (entry.aug > 0) {
                f = apply_augmentation(std::move(f), entry.aug, cfg.preprocess, aug_rng);
            }
            clip.push_back(std::move(f));
        }

        const auto seq =
            rankpool::build_feature_seq(clip, rankpool::FeatureMap::Identity, cfg.rankpool.smooth);
        rankpool::DynamicImage im;
        if (cfg.rankpool.method == "exact") {
            im = rankpool::solve_rank_pool(seq, cfg.rankpool.solver);
        } else {
            im = rankpool::approx_rank_pool(seq, cfg.rankpool.solver.lambda);
        }

        const fs::path png_path = fs::path(pooled_dir(cfg)) / (name + ".png");
        img::save(im.to_frame(), png_path.string());

        nlohmann::ordered_json sidecar;
        sidecar["source_id"] = entry.source_id;
        sidecar["start"] = entry.start;
        sidecar["T"] = im.T;
        sidecar["aug"] = entry.aug;
        sidecar["aug_transform"] = aug_transform_name(entry.aug);
        sidecar["augment_then_pool"] = true;
        sidecar["label"] = data::to_string(entry.label);
        sidecar["split"] = data::to_string(entry.split);
        sidecar["solver"] = im.solver;
        sidecar["smooth"] = cfg.rankpool.smooth;
        sidecar["lambda"] = im.lambda;
        sidecar["iterations"] = im.iterations;
        sidecar["energy"] = im.energy;
        sidecar["norm_min"] = im.norm_min;
        sidecar["norm_max"] = im.norm_max;
        sidecar["width"] = im.width;
        sidecar["height"] = im.height;
        sidecar["channels"] = im.channels;
        std::ofstream side((fs::path(pooled_dir(cfg)) / (name + ".json")).string(),
                           std::ios::trunc);
        if (!side) throw IoError("cannot write sidecar for " + name);
        side << sidecar.dump(2) << "\n";
    });

    // Skip log, rewritten every run, in manifest order.
    std::ofstream log(skip_log_path(cfg), std::ios::trunc);
    if (!log) throw IoError("cannot write skip log: " + skip_log_path(cfg));
    for (const auto& s : skips) {
        if (!s) continue;
        nlohmann::ordered_json j;
        j["name"] = s->name;
        j["reason"] = s->reason;
        log << j.dump() << "\n";
        std::cerr << "warning: skipped " << s->name << ": " << s->reason << "\n";
    }
}

// ---- pooled artifact loading shared by train/eval/crossval ----

namespace {

struct PooledSet {
    nn::Dataset all;
    std::vector<data::Split> splits;
};

PooledSet load_pooled(const PipelineConfig& cfg) {
    if (!fs::exists(cfg.paths.manifest)) {
        throw IoError("manifest not found: " + cfg.paths.manifest);
    }
    data::Manifest manifest = data::load_manifest(cfg.paths.manifest);
    if (!manifest.entries.empty() && manifest.T != cfg.dataset.T) {
        throw ValidationError("manifest T = " + std::to_string(manifest.T) +
                              " disagrees with config dataset.T = " +
                              std::to_string(cfg.dataset.T));
    }
    manifest = data::expand_augmented(manifest, cfg.preprocess.multiplier);
    const fs::path dir = pooled_dir(cfg);
    if (!fs::is_directory(dir)) {
        throw IoError("pooled directory not found (run pool first): " + dir.string());
    }

    std::set<std::string> skipped;
    if (fs::exists(skip_log_path(cfg))) {
        std::ifstream log(skip_log_path(cfg));
        std::string line;
        while (std::getline(log, line)) {
            if (line.empty()) continue;
            const auto j = json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("name")) {
                skipped.insert(j.at("name").get<std::string>());
            }
        }
    }

    PooledSet out;
    for (const auto& entry : manifest.entries) {
        const std::string name = pooled_basename(entry);
        if (skipped.count(name)) continue;
        const fs::path side_path = dir / (name + ".json");
        const fs::path png_path = dir / (name + ".png");
        if (!fs::exists(side_path) || !fs::exists(png_path)) {
            throw DataError("pooled output missing for entry " + name + "; run pool first");
        }
        std::ifstream side(side_path.string());
        json sidecar;
        try {
            side >> sidecar;
        } catch (const json::exception& e) {
            throw DataError("bad sidecar " + side_path.string() + ": " + e.what());
        }
        const int T = sidecar.at("T").get<int>();
        if (T != cfg.dataset.T) {
            throw ValidationError("pooled output " + name + " was built with T = " +
                                  std::to_string(T) + ", config says " +
                                  std::to_string(cfg.dataset.T));
        }
        const img::Frame image = img::load(png_path.string());
        if (out.all.images.empty()) {
            out.all.h = image.height;
            out.all.w = image.width;
            out.all.c = image.channels;
        } else if (image.height != out.all.h || image.width != out.all.w ||
                   image.channels != out.all.c) {
            throw ShapeError("pooled image " + name + " has inconsistent dimensions");
        }
        out.all.images.push_back(nn::planar_from_frame(image));
        out.all.labels.push_back(
            class_index(data::label_from_string(sidecar.at("label").get<std::string>())));
        out.splits.push_back(data::split_from_string(sidecar.at("split").get<std::string>()));
    }
    if (out.all.images.empty()) {
        throw DataError("no pooled images found under " + dir.string());
    }
    return out;
}

nn::Dataset select_split(const PooledSet& set, data::Split which) {
    nn::Dataset out;
    out.h = set.all.h;
    out.w = set.all.w;
    out.c = set.all.c;
    for (std::size_t i = 0; i < set.all.images.size(); ++i) {
        if (set.splits[i] == which) {
            out.images.push_back(set.all.images[i]);
            out.labels.push_back(set.all.labels[i]);
        }
    }
    return out;
}

}  // namespace

// ---- train / eval / crossval ----

void cmd_train(const PipelineConfig& cfg) {
    const PooledSet set = load_pooled(cfg);
    const nn::Dataset train_set = select_split(set, data::Split::Train);
    const nn::Dataset val_set = select_split(set, data::Split::Test);

    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 0x7a11);
    const nn::TrainResult result = nn::train(train_set, val_set, tc);

    std::error_code ec;
    fs::create_directories(cfg.paths.out_dir, ec);
    nn::save_weights(result.params, weights_path(cfg));
    nn::save_trace_csv(result.trace, trace_path(cfg));
}

void cmd_eval(const PipelineConfig& cfg) {
    if (!fs::exists(weights_path(cfg))) {
        throw IoError("weights not found (run train first): " + weights_path(cfg));
    }
    const nn::ModelParams params = nn::load_weights(weights_path(cfg));
    const PooledSet set = load_pooled(cfg);
    const nn::Dataset test_set = select_split(set, data::Split::Test);
    if (test_set.size() == 0) {
        throw DataError("test split is empty");
    }
    if (test_set.h != params.in_h || test_set.w != params.in_w || test_set.c != params.in_c) {
        throw ShapeError("weights expect " + std::to_string(params.in_w) + "x" +
                         std::to_string(params.in_h) + "x" + std::to_string(params.in_c) +
                         " inputs, pooled images are " + std::to_string(test_set.w) + "x" +
                         std::to_string(test_set.h) + "x" + std::to_string(test_set.c));
    }

    const auto probs = nn::predict(params, test_set);
    const int positive_idx = class_index(cfg.eval.positive);
    std::vector<data::Label> preds, truth;
    std::vector<double> scores;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        const double* p = probs.data() + i * nn::kClasses;
        preds.push_back(p[1] > p[0] ? data::Label::Other : data::Label::Ruminating);
        truth.push_back(test_set.labels[i] == 0 ? data::Label::Ruminating : data::Label::Other);
        scores.push_back(p[positive_idx]);
    }
    const eval::EvalReport report = eval::evaluate(scores, preds, truth, cfg.eval.positive);
    eval::save_report_json(report, report_path(cfg));
    eval::save_roc_csv(report.roc_points, roc_path(cfg));
}

void cmd_crossval(const PipelineConfig& cfg) {
    const PooledSet set = load_pooled(cfg);
    nn::TrainConfig tc = cfg.train;
    const eval::CrossValSummary summary =
        eval::crossval(set.all, tc, cfg.eval.folds, derive_seed(cfg.seed, 0xcf0), cfg.jobs,
                       cfg.eval.positive);
    std::error_code ec;
    fs::create_directories(cfg.paths.out_dir, ec);
    eval::save_crossval_json(summary, crossval_path(cfg));
}

}  // namespace rumi::cli
