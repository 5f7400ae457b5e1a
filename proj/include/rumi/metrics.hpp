#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rumi/dataset.hpp"
#include "rumi/errors.hpp"
#include "rumi/nn.hpp"

namespace rumi::eval {

struct ConfusionMatrix {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t total() const { return tp + tn + fp + fn; }
};

// Counts the four outcomes with `positive` as the positive class.
ConfusionMatrix confusion(const std::vector<data::Label>& preds,
                          const std::vector<data::Label>& truth,
                          data::Label positive = data::Label::Ruminating);

// (TP + TN) / (TP + FP + TN + FN); the matrix must be non-empty.
double accuracy(const ConfusionMatrix& cm);

// TP / (TP + FP); nullopt when the denominator is zero. Undefined metrics
// are never silently reported as 0 or 1.
std::optional<double> precision(const ConfusionMatrix& cm);

// TP / (TP + FN); nullopt when the denominator is zero.
std::optional<double> sensitivity(const ConfusionMatrix& cm);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1), monotone
    double auc = 0.0;
};

// ROC over the unique score thresholds (ties grouped into one step) and
// trapezoidal AUC, which then equals the Mann-Whitney pair statistic.
// nullopt when truth contains a single class.
std::optional<RocCurve> roc_auc(const std::vector<double>& scores,
                                const std::vector<data::Label>& truth,
                                data::Label positive = data::Label::Ruminating);

struct ClassMetrics {
    std::optional<double> precision;
    std::optional<double> recall;
};

struct EvalReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> auc;
    ClassMetrics positive_class;
    ClassMetrics negative_class;
    std::vector<RocPoint> roc_points;
    data::Label positive = data::Label::Ruminating;
    std::uint64_t n = 0;
};

// Builds the full report from positive-class scores (threshold 0.5 for the
// hard predictions) and ground truth.
EvalReport evaluate(const std::vector<double>& scores, const std::vector<data::Label>& preds,
                    const std::vector<data::Label>& truth,
                    data::Label positive = data::Label::Ruminating);

std::string report_to_json(const EvalReport& report);
void save_report_json(const EvalReport& report, const std::string& path);
void save_roc_csv(const std::vector<RocPoint>& points, const std::string& path);

struct FoldResult {
    int fold = 0;
    double accuracy = 0.0;
    double auc = 0.0;
};

struct CrossValSummary {
    int k = 0;
    std::vector<FoldResult> folds;
    double mean_accuracy = 0.0, std_accuracy = 0.0;
    double mean_auc = 0.0, std_auc = 0.0;
};

// Mean and population standard deviation of the per-fold metrics.
CrossValSummary summarize_folds(const std::vector<FoldResult>& folds);

// k-fold cross-validation over pooled dynamic images: folds are stratified
// per class, each fold is held out once and the model is trained on the
// rest (with the held-out fold as the early-stopping validation set).
// Per-fold seeds derive from (cfg.seed, fold), so fold-parallel and
// fold-serial runs agree bit-for-bit.
CrossValSummary crossval(const nn::Dataset& dataset, const nn::TrainConfig& cfg, int k,
                         std::uint64_t seed, unsigned jobs = 1,
                         data::Label positive = data::Label::Ruminating);

std::string crossval_to_json(const CrossValSummary& summary);
void save_crossval_json(const CrossValSummary& summary, const std::string& path);

}  // namespace rumi::eval
