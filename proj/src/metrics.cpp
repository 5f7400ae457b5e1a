#include "rumi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace rumi::eval {

ConfusionMatrix confusion(const std::vector<data::Label>& preds,
                          const std::vector<data::Label>& truth, data::Label positive) {
    if (preds.size() != truth.size() || preds.empty()) {
        throw ShapeError("confusion: predictions (" + std::to_string(preds.size()) +
                         ") and truth (" + std::to_string(truth.size()) +
                         ") must have equal non-zero length");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == positive;
        const bool t = truth[i] == positive;
        if (p && t) ++cm.tp;
        else if (p && !t) ++cm.fp;
        else if (!p && t) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) {
        throw ParamError("accuracy of an empty confusion matrix is undefined");
    }
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
}

std::optional<double> precision(const ConfusionMatrix& cm) {
    const std::uint64_t den = cm.tp + cm.fp;
    if (den == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(den);
}

std::optional<double> sensitivity(const ConfusionMatrix& cm) {
    const std::uint64_t den = cm.tp + cm.fn;
    if (den == 0) return std::nullopt;
    return static_cast<double>(cm.tp) / static_cast<double>(den);
}

std::optional<RocCurve> roc_auc(const std::vector<double>& scores,
                                const std::vector<data::Label>& truth, data::Label positive) {
    if (scores.size() != truth.size() || scores.empty()) {
        throw ShapeError("roc_auc: scores and truth must have equal non-zero length");
    }
    std::uint64_t npos = 0, nneg = 0;
    for (const auto& t : truth) {
        (t == positive ? npos : nneg) += 1;
    }
    if (npos == 0 || nneg == 0) {
        return std::nullopt;  // single-class truth: curve undefined
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::uint64_t tp = 0, fp = 0;
    double auc = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Group every sample sharing this score into one threshold step.
        while (i < order.size() && scores[order[i]] == s) {
            if (truth[order[i]] == positive) ++tp;
            else ++fp;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(nneg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(npos);
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        curve.points.push_back({s, fpr, tpr});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    curve.auc = auc;
    return curve;
}

EvalReport evaluate(const std::vector<double>& scores, const std::vector<data::Label>& preds,
                    const std::vector<data::Label>& truth, data::Label positive) {
    if (scores.size() != truth.size()) {
        throw ShapeError("evaluate: scores and truth length mismatch");
    }
    EvalReport r;
    r.positive = positive;
    r.n = truth.size();
    r.confusion = confusion(preds, truth, positive);
    r.accuracy = accuracy(r.confusion);
    r.precision = precision(r.confusion);
    r.recall = sensitivity(r.confusion);
    r.positive_class = {r.precision, r.recall};

    // Swapping the positive designation swaps tp<->tn and fp<->fn.
    ConfusionMatrix swapped{r.confusion.tn, r.confusion.tp, r.confusion.fn, r.confusion.fp};
    r.negative_class = {precision(swapped), sensitivity(swapped)};

    if (const auto curve = roc_auc(scores, truth, positive)) {
        r.auc = curve->auc;
        r.roc_points = curve->points;
    }
    return r;
}

namespace {

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["n"] = r.n;
    j["positive_class"] = data::to_string(r.positive);
    j["confusion"] = {{"tp", r.confusion.tp},
                      {"tn", r.confusion.tn},
                      {"fp", r.confusion.fp},
                      {"fn", r.confusion.fn}};
    j["accuracy"] = r.accuracy;
    j["precision"] = opt_json(r.precision);
    j["recall"] = opt_json(r.recall);
    j["auc"] = opt_json(r.auc);
    j["per_class"] = nlohmann::ordered_json::object();
    j["per_class"][data::to_string(r.positive)] = {
        {"precision", opt_json(r.positive_class.precision)},
        {"recall", opt_json(r.positive_class.recall)}};
    const data::Label negative =
        r.positive == data::Label::Ruminating ? data::Label::Other : data::Label::Ruminating;
    j["per_class"][data::to_string(negative)] = {
        {"precision", opt_json(r.negative_class.precision)},
        {"recall", opt_json(r.negative_class.recall)}};
    // Curve geometry only; thresholds live in the ROC CSV.
    auto pts = nlohmann::ordered_json::array();
    for (const auto& p : r.roc_points) {
        pts.push_back({p.fpr, p.tpr});
    }
    j["roc_points"] = std::move(pts);
    return j.dump(2) + "\n";
}

void save_report_json(const EvalReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open report for writing: " + path);
    f << report_to_json(report);
    if (!f) throw IoError("report write failed: " + path);
}

void save_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open ROC csv for writing: " + path);
    f << "threshold,fpr,tpr\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        f << buf;
    }
    if (!f) throw IoError("ROC csv write failed: " + path);
}

CrossValSummary summarize_folds(const std::vector<FoldResult>& folds) {
    if (folds.empty()) {
        throw DataError("no folds to summarize");
    }
    CrossValSummary s;
    s.k = static_cast<int>(folds.size());
    s.folds = folds;
    const double inv = 1.0 / static_cast<double>(folds.size());
    for (const auto& f : folds) {
        s.mean_accuracy += f.accuracy;
        s.mean_auc += f.auc;
    }
    s.mean_accuracy *= inv;
    s.mean_auc *= inv;
    double var_acc = 0.0, var_auc = 0.0;
    for (const auto& f : folds) {
        var_acc += (f.accuracy - s.mean_accuracy) * (f.accuracy - s.mean_accuracy);
        var_auc += (f.auc - s.mean_auc) * (f.auc - s.mean_auc);
    }
    // Population standard deviation (divide by k, not k - 1).
    s.std_accuracy = std::sqrt(var_acc * inv);
    s.std_auc = std::sqrt(var_auc * inv);
    return s;
}

std::string crossval_to_json(const CrossValSummary& s) {
    nlohmann::ordered_json j;
    j["k"] = s.k;
    auto folds = nlohmann::ordered_json::array();
    for (const auto& f : s.folds) {
        folds.push_back({{"fold", f.fold}, {"accuracy", f.accuracy}, {"auc", f.auc}});
    }
    j["folds"] = std::move(folds);
    j["summary"] = {{"mean_accuracy", s.mean_accuracy}, {"std_accuracy", s.std_accuracy},
                    {"mean_auc", s.mean_auc},           {"std_auc", s.std_auc},
                    {"std_kind", "population"}};
    return j.dump(2) + "\n";
}

void save_crossval_json(const CrossValSummary& summary, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open crossval report for writing: " + path);
    f << crossval_to_json(summary);
    if (!f) throw IoError("crossval report write failed: " + path);
}

}  // namespace rumi::eval
