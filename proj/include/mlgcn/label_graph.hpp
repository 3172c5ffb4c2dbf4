#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlgcn/tensor.hpp"

namespace mlgcn {

// Label correlation pipeline: co-occurrence counts -> conditional
// probabilities -> thresholded binary graph -> re-weighted, row-stochastic
// graph -> symmetrically normalized propagation matrix.

struct CooccurrenceStats {
    std::size_t label_count = 0;              // C
    std::vector<std::int64_t> pair_counts;    // C x C row-major, symmetric, zero diagonal
    std::vector<std::int64_t> label_counts;   // per-label occurrence N_i

    std::int64_t pairs(std::size_t i, std::size_t j) const {
        return pair_counts[i * label_count + j];
    }
};

enum class GraphStage {
    conditional, // P: P[i][j] = P(label j | label i), asymmetric
    binary,      // A: edges with P >= tau
    reweighted,  // A': self-weight 1-p, p spread over surviving neighbors
    normalized,  // A^: D^{-1/2} A' D^{-1/2}
};

const char* stage_name(GraphStage s);

struct CorrelationMatrix {
    Tensor values;  // C x C
    GraphStage stage = GraphStage::conditional;
    double tau = 0.0; // meaningful from binary onwards
    double p = -1.0;  // meaningful from reweighted onwards

    std::size_t label_count() const { return values.dim(0); }
    // True when every row that has neighbors carries zero self-weight
    // (the p=1 configuration).
    bool zero_self_weight() const;
};

// Counts per-label and pairwise occurrences over samples given as label-index
// sets. Duplicate indices within a sample are an ingestion bug upstream and
// rejected; indices must be < label_count.
CooccurrenceStats count_cooccurrence(std::span<const std::vector<std::size_t>> samples,
                                     std::size_t label_count);

// P[i][j] = pairs(i,j) / N_i for i != j; rows of never-seen labels are zero.
CorrelationMatrix conditional_probability(const CooccurrenceStats& stats);

// A[i][j] = 1 iff P[i][j] >= tau. tau in (0, 1].
CorrelationMatrix binarize(const CorrelationMatrix& conditional, double tau);

// A'[i][j] = p * A[i][j] / (row-degree of i) off-diagonal, 1-p on the
// diagonal; rows without neighbors put full weight on self. Every row sums
// to exactly 1. p in [0, 1].
CorrelationMatrix reweight(const CorrelationMatrix& binary, double p);

// A^ = D^{-1/2} A' D^{-1/2} with D_ii = sum_j A'[i][j] + 1e-6.
CorrelationMatrix normalize_adjacency(const CorrelationMatrix& reweighted);

} // namespace mlgcn
