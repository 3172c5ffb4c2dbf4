#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mlgcn/autodiff.hpp"
#include "mlgcn/embeddings.hpp"
#include "mlgcn/label_graph.hpp"
#include "mlgcn/tensor.hpp"

namespace mlgcn {

struct ModelConfig {
    // Output dimensionality of each stacked layer; the last entry is the
    // feature dimension D the classifiers must match.
    std::vector<std::size_t> layer_dims = {1024, 2048};
    double slope = 0.2;             // LeakyReLU negative slope
    bool final_activation = false;  // apply the nonlinearity after the last layer too
    std::uint64_t seed = 1;
};

struct GcnLayer {
    Tensor weight;  // d_l x d_{l+1}
};

// Stacked GCN over a fixed label graph: starting from the label embeddings,
// each layer mixes rows through the adjacency and maps them with a trainable
// weight; the final rows are per-label classifiers W (C x D). The adjacency
// and embeddings are fixed; only the layer weights train.
class MlGcnModel {
public:
    // Draws layer weights uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    // with the config seed.
    static MlGcnModel init(CorrelationMatrix adjacency, EmbeddingMatrix embeddings,
                           ModelConfig config);

    // Wraps existing weights (checkpoint load, functional updates).
    MlGcnModel(CorrelationMatrix adjacency, EmbeddingMatrix embeddings, ModelConfig config,
               std::vector<GcnLayer> layers);

    const ModelConfig& config() const { return config_; }
    const CorrelationMatrix& adjacency() const { return adjacency_; }
    const EmbeddingMatrix& embeddings() const { return embeddings_; }
    std::size_t label_count() const { return adjacency_.label_count(); }
    std::size_t feature_dim() const { return config_.layer_dims.back(); }
    std::size_t layer_count() const { return layers_.size(); }
    const Tensor& weight(std::size_t layer) const { return layers_[layer].weight; }

    // Replaces the trainable weights; shapes must match the existing stack.
    void set_weights(std::vector<Tensor> weights);

    // Plain forward pass: H0 = Z, H_{l+1} = LeakyReLU(A H_l W_l) with the
    // activation omitted on the last layer unless configured otherwise.
    // Returns the classifier matrix C x D.
    Tensor generate_classifiers() const;

    // Same computation recorded on a tape; `weights` are the tracked leaves
    // to differentiate against.
    struct TapedForward {
        Var classifiers;
        std::vector<Var> weights;
    };
    TapedForward forward(Tape& tape) const;

private:
    CorrelationMatrix adjacency_;
    EmbeddingMatrix embeddings_;
    ModelConfig config_;
    std::vector<GcnLayer> layers_;

    void validate() const;
};

// Raw per-label scores for one representation: y = W x.
Tensor predict(const Tensor& classifiers, const Tensor& features);
// Batched form: X (B x D) -> scores (B x C) = X * W^T.
Tensor predict_batch(const Tensor& classifiers, const Tensor& features);

// Multi-label loss on logits: mean over rows, sum over classes.
double bce_loss(const Tensor& scores, const Tensor& targets);

// Checkpoint: one binary matrix file per layer plus the adjacency and
// embeddings, tied together by a plain-text manifest that also carries the
// vocabulary.
void save_checkpoint(const std::filesystem::path& dir, const MlGcnModel& model,
                     const LabelVocabulary& vocab);

struct LoadedCheckpoint {
    MlGcnModel model;
    LabelVocabulary vocabulary;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mlgcn
