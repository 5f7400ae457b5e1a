#include "rumi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rumi/rng.hpp"

namespace rumi::data {

const char* to_string(Label l) { return l == Label::Ruminating ? "Ruminating" : "Other"; }

Label label_from_string(const std::string& s) {
    if (s == "Ruminating") return Label::Ruminating;
    if (s == "Other") return Label::Other;
    throw ParamError("unknown label: " + s);
}

const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw ParamError("unknown split: " + s);
}

const char* to_string(SynthKind k) {
    switch (k) {
        case SynthKind::Periodic: return "periodic";
        case SynthKind::Drift: return "drift";
        case SynthKind::Static: return "static";
    }
    return "static";
}

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "periodic") return SynthKind::Periodic;
    if (s == "drift") return SynthKind::Drift;
    if (s == "static") return SynthKind::Static;
    throw ParamError("unknown synth kind: " + s);
}

std::vector<int> window(int frame_count, int T, int stride) {
    if (T < 2) {
        throw ParamError("window length T must be at least 2, got " + std::to_string(T));
    }
    if (stride < 1) {
        throw ParamError("stride must be at least 1, got " + std::to_string(stride));
    }
    std::vector<int> starts;
    for (long start = 0; start + T <= frame_count; start += stride) {
        starts.push_back(static_cast<int>(start));
    }
    return starts;
}

Manifest split_manifest(const Manifest& m, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ParamError("test_fraction must lie strictly between 0 and 1");
    }
    const std::size_t n = m.entries.size();
    if (n == 0) {
        return m;
    }

    // Group entry indices by label, in label order.
    const Label classes[2] = {Label::Ruminating, Label::Other};
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < n; ++i) {
        by_class[m.entries[i].label == Label::Ruminating ? 0 : 1].push_back(i);
    }
    for (int c = 0; c < 2; ++c) {
        if (!by_class[c].empty() && by_class[c].size() < 2) {
            throw StratificationError(std::string("class ") + to_string(classes[c]) +
                                      " has fewer than 2 clips; cannot stratify");
        }
    }

    const long total_test = std::lround(test_fraction * static_cast<double>(n));

    // Largest-remainder allocation of the test budget across classes.
    long base[2] = {0, 0};
    double remainder[2] = {0.0, 0.0};
    long assigned = 0;
    for (int c = 0; c < 2; ++c) {
        const double exact = test_fraction * static_cast<double>(by_class[c].size());
        base[c] = static_cast<long>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(base[c]);
        assigned += base[c];
    }
    for (long left = total_test - assigned; left > 0; --left) {
        const int c = remainder[0] >= remainder[1] ? 0 : 1;
        base[c] += 1;
        remainder[c] = -1.0;
    }
    // Keep every non-empty class represented on both sides.
    const bool both_classes = !by_class[0].empty() && !by_class[1].empty();
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].empty()) continue;
        const long nc = static_cast<long>(by_class[c].size());
        const long lo = both_classes ? 1 : 0;
        const long hi = both_classes ? nc - 1 : nc;
        const long clamped = std::clamp(base[c], lo, hi);
        if (clamped != base[c]) {
            const long delta = base[c] - clamped;
            base[c] = clamped;
            const int other = 1 - c;
            if (!by_class[other].empty()) {
                const long onc = static_cast<long>(by_class[other].size());
                base[other] = std::clamp(base[other] + delta, both_classes ? 1L : 0L,
                                         both_classes ? onc - 1 : onc);
            }
        }
    }

    Manifest out = m;
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].empty()) continue;
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < by_class[c].size(); ++i) {
            out.entries[by_class[c][i]].split =
                static_cast<long>(i) < base[c] ? Split::Test : Split::Train;
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) {
        throw ParamError("fold count must be at least 2, got " + std::to_string(k));
    }
    if (n < static_cast<std::size_t>(k)) {
        throw ParamError("cannot make " + std::to_string(k) + " folds from " + std::to_string(n) +
                         " items");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx);

    const std::size_t q = n / static_cast<std::size_t>(k);
    const std::size_t r = n % static_cast<std::size_t>(k);
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    std::size_t at = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const std::size_t size = q + (f < r ? 1 : 0);
        folds[f].assign(idx.begin() + at, idx.begin() + at + size);
        at += size;
    }
    return folds;
}

namespace {

struct PatchSpec {
    double radius;
    double color[3];
};

// Blends an antialiased disk into the frame and marks its footprint.
void splat_patch(img::Frame& f, double cx, double cy, const PatchSpec& patch,
                 std::vector<std::uint8_t>* mask) {
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - patch.radius - 1)));
    const int x1 = std::min(f.width - 1, static_cast<int>(std::ceil(cx + patch.radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - patch.radius - 1)));
    const int y1 = std::min(f.height - 1, static_cast<int>(std::ceil(cy + patch.radius + 1)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double dist = std::sqrt(dx * dx + dy * dy);
            const double s = std::clamp(patch.radius + 0.5 - dist, 0.0, 1.0);
            if (s <= 0.0) continue;
            for (int c = 0; c < f.channels; ++c) {
                const double bg = f.at(x, y, c);
                f.at(x, y, c) = bg + s * (patch.color[c % 3] - bg);
            }
            if (mask) {
                (*mask)[static_cast<std::size_t>(y) * f.width + x] = 1;
            }
        }
    }
}

}  // namespace

SynthClip synth_clip(SynthKind kind, const SynthParams& p, std::uint64_t seed) {
    if (p.T < 2) {
        throw ParamError("synthetic clip needs T >= 2, got " + std::to_string(p.T));
    }
    if (p.width < 8 || p.height < 8) {
        throw ParamError("synthetic frame must be at least 8x8");
    }
    if (p.channels != 1 && p.channels != 3) {
        throw ParamError("synthetic clip channels must be 1 or 3");
    }
    if (p.noise < 0.0) {
        throw ParamError("noise amplitude must be non-negative");
    }

    Rng rng(seed);

    // Per-clip background: gentle two-axis gradient.
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.25, 0.5);
        gx[c] = rng.uniform(-0.15, 0.15);
        gy[c] = rng.uniform(-0.15, 0.15);
    }

    PatchSpec patch;
    patch.radius = std::max(2.0, std::min(p.width, p.height) / 8.0);
    for (int c = 0; c < 3; ++c) patch.color[c] = rng.uniform(0.75, 1.0);

    const double margin = patch.radius + 2.0;
    const double cx_mid = p.width / 2.0 + rng.uniform(-2.0, 2.0);
    const double cy_mid = p.height / 2.0 + rng.uniform(-2.0, 2.0);

    // Oscillation period: integer 5..8 frames (1.25-2 s at 4 fps).
    const int period = 5 + static_cast<int>(rng.uniform_int(4));
    const double amplitude =
        std::min(p.width * 0.18, p.width / 2.0 - margin - std::abs(cx_mid - p.width / 2.0));
    const double phase = rng.uniform(0.0, 6.283185307179586);

    // Drift endpoints: opposite sides, crossing most of the frame.
    const double drift_x0 = margin;
    const double drift_x1 = p.width - margin;
    const double drift_y0 = rng.uniform(margin, p.height - margin);
    const double drift_y1 = rng.uniform(margin, p.height - margin);
    const bool flip = rng.uniform() < 0.5;

    SynthClip clip;
    clip.kind = kind;
    clip.label = kind == SynthKind::Periodic ? Label::Ruminating : Label::Other;
    clip.path_mask.assign(static_cast<std::size_t>(p.width) * p.height, 0);
    clip.frames.reserve(static_cast<std::size_t>(p.T));

    img::Frame background(p.width, p.height, p.channels);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            for (int c = 0; c < p.channels; ++c) {
                background.at(x, y, c) =
                    base[c % 3] + gx[c % 3] * (static_cast<double>(x) / p.width) +
                    gy[c % 3] * (static_cast<double>(y) / p.height);
            }
        }
    }

    for (int t = 0; t < p.T; ++t) {
        double cx = cx_mid, cy = cy_mid;
        switch (kind) {
            case SynthKind::Periodic:
                cx = cx_mid + amplitude * std::sin(6.283185307179586 * t / period + phase);
                break;
            case SynthKind::Drift: {
                const double a = static_cast<double>(t) / (p.T - 1);
                cx = drift_x0 + (drift_x1 - drift_x0) * a;
                cy = drift_y0 + (drift_y1 - drift_y0) * a;
                if (flip) cx = p.width - cx;
                break;
            }
            case SynthKind::Static:
                break;
        }
        img::Frame frame = background;
        splat_patch(frame, cx, cy, patch, &clip.path_mask);
        if (p.noise > 0.0) {
            for (auto& v : frame.pixels) {
                v = std::clamp(v + rng.uniform(-p.noise, p.noise), 0.0, 1.0);
            }
        }
        clip.frames.push_back(std::move(frame));
    }
    return clip;
}

Manifest expand_augmented(const Manifest& m, int multiplier) {
    if (multiplier < 1) {
        throw ParamError("augmentation multiplier must be at least 1");
    }
    if (multiplier == 1) {
        Manifest out = m;
        out.multiplier = 1;
        return out;
    }
    Manifest out;
    out.T = m.T;
    out.multiplier = multiplier;
    out.entries.reserve(m.entries.size() * static_cast<std::size_t>(multiplier));
    for (const auto& e : m.entries) {
        for (int a = 0; a < multiplier; ++a) {
            LabeledClip copy = e;
            copy.aug = a;
            out.entries.push_back(std::move(copy));
        }
    }
    return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open manifest for writing: " + path);
    for (const auto& e : m.entries) {
        nlohmann::ordered_json j;
        j["source_id"] = e.source_id;
        j["start"] = e.start;
        j["T"] = e.T;
        j["label"] = to_string(e.label);
        j["split"] = to_string(e.split);
        if (e.crop) {
            j["crop"] = {e.crop->x, e.crop->y, e.crop->w, e.crop->h};
        }
        if (e.aug != 0) {
            j["aug"] = e.aug;
        }
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("manifest write failed: " + path);
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
        }
        LabeledClip e;
        try {
            e.source_id = j.at("source_id").get<std::string>();
            e.start = j.at("start").get<int>();
            e.T = j.at("T").get<int>();
            e.label = label_from_string(j.at("label").get<std::string>());
            e.split = split_from_string(j.at("split").get<std::string>());
            if (j.contains("crop")) {
                const auto& c = j.at("crop");
                e.crop = img::CropRect{c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>(),
                                       c.at(3).get<int>()};
            }
            if (j.contains("aug")) {
                e.aug = j.at("aug").get<int>();
            }
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
        if (m.entries.empty()) {
            m.T = e.T;
        } else if (e.T != m.T) {
            throw DataError(path + ":" + std::to_string(lineno) + ": mixed T values (" +
                            std::to_string(e.T) + " vs " + std::to_string(m.T) + ")");
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::string frame_file_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.png", index + 1);
    return buf;
}

}  // namespace rumi::data
