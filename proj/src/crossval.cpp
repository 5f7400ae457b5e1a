#include <string>
#include <vector>

#include "rumi/metrics.hpp"
#include "rumi/parallel.hpp"
#include "rumi/rng.hpp"

namespace rumi::eval {

namespace {

// Class index convention: Ruminating = 0, Other = 1.
data::Label label_of_index(int idx) {
    return idx == 0 ? data::Label::Ruminating : data::Label::Other;
}

nn::Dataset subset(const nn::Dataset& all, const std::vector<std::size_t>& indices) {
    nn::Dataset out;
    out.h = all.h;
    out.w = all.w;
    out.c = all.c;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.images.push_back(all.images[i]);
        out.labels.push_back(all.labels[i]);
    }
    return out;
}

}  // namespace

CrossValSummary crossval(const nn::Dataset& dataset, const nn::TrainConfig& cfg, int k,
                         std::uint64_t seed, unsigned jobs, data::Label positive) {
    if (k < 2) {
        throw ParamError("cross-validation needs k >= 2");
    }
    if (dataset.size() == 0 || dataset.labels.size() != dataset.images.size()) {
        throw DataError("cross-validation dataset is empty or inconsistent");
    }

    // Stratified folds: deal each class separately, then merge fold-wise.
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const int cls = dataset.labels[i];
        if (cls < 0 || cls > 1) throw DataError("labels must be 0 or 1");
        by_class[cls].push_back(i);
    }
    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (int cls = 0; cls < 2; ++cls) {
        if (by_class[cls].empty()) continue;
        if (by_class[cls].size() < static_cast<std::size_t>(k)) {
            throw StratificationError(std::string("class ") +
                                      data::to_string(label_of_index(cls)) + " has only " +
                                      std::to_string(by_class[cls].size()) +
                                      " examples; cannot stratify into " + std::to_string(k) +
                                      " folds");
        }
        const auto class_folds = data::kfold_indices(
            by_class[cls].size(), k, derive_seed(seed, 0xf01d, static_cast<std::uint64_t>(cls)));
        for (int f = 0; f < k; ++f) {
            for (std::size_t local : class_folds[static_cast<std::size_t>(f)]) {
                folds[static_cast<std::size_t>(f)].push_back(by_class[cls][local]);
            }
        }
    }

    const int positive_idx = positive == data::Label::Ruminating ? 0 : 1;
    std::vector<FoldResult> results(static_cast<std::size_t>(k));

    parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t g = 0; g < folds.size(); ++g) {
            if (g == f) continue;
            train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        }
        const nn::Dataset train_set = subset(dataset, train_idx);
        const nn::Dataset held_out = subset(dataset, folds[f]);

        nn::TrainConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(seed, 0x7e57, f);
        const nn::TrainResult trained = nn::train(train_set, held_out, fold_cfg);

        const auto probs = nn::predict(trained.params, held_out);
        std::vector<data::Label> preds, truth;
        std::vector<double> scores;
        preds.reserve(held_out.size());
        truth.reserve(held_out.size());
        scores.reserve(held_out.size());
        for (std::size_t i = 0; i < held_out.size(); ++i) {
            const double* p = probs.data() + i * nn::kClasses;
            preds.push_back(label_of_index(p[1] > p[0] ? 1 : 0));
            truth.push_back(label_of_index(held_out.labels[i]));
            scores.push_back(p[positive_idx]);
        }
        FoldResult r;
        r.fold = static_cast<int>(f);
        r.accuracy = accuracy(confusion(preds, truth, positive));
        const auto curve = roc_auc(scores, truth, positive);
        if (!curve) {
            throw DataError("fold " + std::to_string(f) +
                            " contains a single class; AUC undefined");
        }
        r.auc = curve->auc;
        results[f] = r;
    });

    return summarize_folds(results);
}

}  // namespace rumi::eval
