#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mlgcn/tensor.hpp"

namespace mlgcn {

// How raw scores become label decisions: either sigmoid(score) > t, or the
// k highest scores per row (ties to the lower label index).
struct DecisionRule {
    enum class Kind { threshold, topk };
    Kind kind = Kind::threshold;
    double threshold = 0.5;
    std::size_t k = 3;

    static DecisionRule thresholded(double t);
    static DecisionRule top(std::size_t k);
    // Accepts "threshold:0.5" or "topk:3".
    static DecisionRule parse(const std::string& text);
    std::string str() const;
};

struct PredictionSet {
    Tensor scores;   // B x C logits
    Tensor decided;  // B x C in {0,1}
    DecisionRule rule;
};

PredictionSet decide_labels(const Tensor& scores, const DecisionRule& rule);

struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

enum class PrfMode { per_class, overall };

// Precision/recall/F1 with the 0/0 -> 0 convention. per_class averages the
// per-class values over all C classes; overall pools every (sample, class)
// decision into one global confusion count.
Prf1 prf1(const PredictionSet& pred, const Tensor& truth, PrfMode mode);

struct MapResult {
    double mean_ap = 0.0;
    // One entry per class; nullopt for classes with no positives, which are
    // excluded from the mean.
    std::vector<std::optional<double>> per_class;
};

// All-points average precision: rank samples by descending score (ties by
// ascending sample index), average precision over the positive ranks.
MapResult mean_average_precision(const Tensor& scores, const Tensor& truth);

struct MetricsReport {
    double class_precision = 0.0;  // CP
    double class_recall = 0.0;     // CR
    double class_f1 = 0.0;         // CF1
    double overall_precision = 0.0;
    double overall_recall = 0.0;
    double overall_f1 = 0.0;
    double mean_ap = 0.0;
    std::vector<std::optional<double>> per_class_ap;
    DecisionRule rule;
};

MetricsReport evaluate_predictions(const Tensor& scores, const Tensor& truth,
                                   const DecisionRule& rule);

// Flat key/value text: one "NAME value" line per metric, 4 decimal places.
std::string format_report(const MetricsReport& report);

struct Neighbor {
    std::size_t index;
    double distance;
};

// The k gallery rows closest to the query in Euclidean distance, ascending,
// ties by ascending index. gallery is G x D, query is rank-1 D.
std::vector<Neighbor> knn_retrieve(const Tensor& query, const Tensor& gallery, std::size_t k);

}  // namespace mlgcn
