#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlgcn/dataset_io.hpp"
#include "mlgcn/gcn.hpp"
#include "mlgcn/metrics.hpp"
#include "mlgcn/rng.hpp"
#include "mlgcn/tensor.hpp"

namespace mlgcn {

struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 100;
    std::size_t decay_every = 40;
    double decay_factor = 0.1;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
};

// Step-decay schedule: lr0 * decay_factor^floor(epoch / decay_every).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

// Per-parameter momentum buffers, one per layer, flat and in layer order.
struct OptimizerState {
    std::vector<std::vector<double>> velocity;
};

// Classic momentum with L2 folded into the gradient:
//   g = grad + weight_decay * param; v = momentum * v + g; param -= lr * v.
// Returns the updated parameter; `velocity` is updated in place.
Tensor sgd_update(const Tensor& param, const Tensor& grad, std::vector<double>& velocity,
                  double lr, double momentum, double weight_decay);

struct EpochRecord {
    std::size_t epoch = 0;
    double mean_loss = 0.0;  // sample-weighted mean over the epoch's batches
    double lr = 0.0;
    std::optional<MetricsReport> validation;
};

using TrainHistory = std::vector<EpochRecord>;

// Line-delimited record per epoch: "epoch<TAB>loss<TAB>lr" (plus mAP when
// validation ran), full precision.
std::string format_history(const TrainHistory& history);

// The sample visitation order for one epoch: a seeded permutation of 0..n-1.
std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng);

struct TrainResult {
    MlGcnModel model;
    TrainHistory history;
};

// SGD-with-momentum over the layer weights. Each batch runs one taped
// forward (classifier generation, batched prediction, loss), one backward,
// and one in-place update. Deterministic for a fixed seed. When `validation`
// is non-null, every epoch's record carries a MetricsReport on it.
TrainResult train(MlGcnModel model, const FeatureDataset& data, const TrainConfig& config,
                  const FeatureDataset* validation = nullptr,
                  const DecisionRule& rule = DecisionRule{});

}  // namespace mlgcn
