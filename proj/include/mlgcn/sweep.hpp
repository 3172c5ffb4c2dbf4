#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mlgcn/dataset_io.hpp"
#include "mlgcn/embeddings.hpp"
#include "mlgcn/metrics.hpp"
#include "mlgcn/trainer.hpp"

namespace mlgcn {

// Ablation grid over the graph-construction hyperparameters: every (tau, p)
// pair gets its own graph build, training run, and evaluation, all from the
// same seeds, so rows differ only in the graph.
struct SweepConfig {
    std::vector<double> tau_grid;
    std::vector<double> p_grid;
    ModelConfig model;
    TrainConfig train;
    DecisionRule rule;
    bool skip_normalization = false;
    std::size_t jobs = 1;  // worker threads; results merge in grid order regardless
};

struct SweepRow {
    double tau = 0.0;
    double p = 0.0;
    // True when the re-weighted graph has zero self-weight on every row with
    // neighbors (the p=1 structure).
    bool degenerate_diagonal = false;
    std::string status = "ok";  // or the error text for failed points
    std::optional<MetricsReport> metrics;
    std::optional<double> final_loss;
};

// Cross product tau_grid x p_grid, row-major with tau outermost.
std::vector<SweepRow> run_sweep(const FeatureDataset& train_data,
                                const FeatureDataset& eval_data, const EmbeddingMatrix& embeddings,
                                const SweepConfig& config);

// Tab-separated table with one header line; failed points carry their error
// in the status column and '-' in the metric columns.
std::string format_sweep(const std::vector<SweepRow>& rows);

}  // namespace mlgcn
