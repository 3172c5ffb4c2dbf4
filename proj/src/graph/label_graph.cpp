#include "mlgcn/label_graph.hpp"

#include <cmath>
#include <string>

#include "mlgcn/errors.hpp"

namespace mlgcn {

const char* stage_name(GraphStage s) {
    switch (s) {
        case GraphStage::conditional: return "conditional";
        case GraphStage::binary: return "binary";
        case GraphStage::reweighted: return "reweighted";
        case GraphStage::normalized: return "normalized";
    }
    return "unknown";
}

bool CorrelationMatrix::zero_self_weight() const {
    const std::size_t c = label_count();
    bool any_neighbors = false;
    for (std::size_t i = 0; i < c; ++i) {
        double off = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j != i) off += std::fabs(values(i, j));
        }
        if (off > 0.0) {
            any_neighbors = true;
            if (values(i, i) != 0.0) return false;
        }
    }
    return any_neighbors;
}

CooccurrenceStats count_cooccurrence(std::span<const std::vector<std::size_t>> samples,
                                     std::size_t label_count) {
    CooccurrenceStats stats;
    stats.label_count = label_count;
    stats.pair_counts.assign(label_count * label_count, 0);
    stats.label_counts.assign(label_count, 0);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& labels = samples[s];
        for (std::size_t a = 0; a < labels.size(); ++a) {
            if (labels[a] >= label_count) {
                throw DataError("sample " + std::to_string(s) + ": label index " +
                                std::to_string(labels[a]) + " >= label count " +
                                std::to_string(label_count));
            }
            for (std::size_t b = a + 1; b < labels.size(); ++b) {
                if (labels[a] == labels[b]) {
                    throw DataError("sample " + std::to_string(s) +
                                    ": duplicate label index " + std::to_string(labels[a]));
                }
            }
        }
        for (std::size_t a = 0; a < labels.size(); ++a) {
            stats.label_counts[labels[a]] += 1;
            for (std::size_t b = a + 1; b < labels.size(); ++b) {
                stats.pair_counts[labels[a] * label_count + labels[b]] += 1;
                stats.pair_counts[labels[b] * label_count + labels[a]] += 1;
            }
        }
    }
    return stats;
}

CorrelationMatrix conditional_probability(const CooccurrenceStats& stats) {
    const std::size_t c = stats.label_count;
    std::vector<double> p(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        const std::int64_t n_i = stats.label_counts[i];
        if (n_i == 0) continue; // never-seen label: leave the row zero
        for (std::size_t j = 0; j < c; ++j) {
            if (j == i) continue;
            p[i * c + j] = static_cast<double>(stats.pair_counts[i * c + j]) /
                           static_cast<double>(n_i);
        }
    }
    CorrelationMatrix m;
    m.values = Tensor(Shape{c, c}, std::move(p));
    m.stage = GraphStage::conditional;
    return m;
}

CorrelationMatrix binarize(const CorrelationMatrix& conditional, double tau) {
    if (conditional.stage != GraphStage::conditional) {
        throw UsageError(std::string("binarize expects a conditional matrix, got ") +
                         stage_name(conditional.stage));
    }
    if (!(tau > 0.0) || tau > 1.0) {
        throw ConfigError("tau must be in (0, 1], got " + std::to_string(tau));
    }
    const std::size_t c = conditional.label_count();
    std::vector<double> a(c * c, 0.0);
    const auto p = conditional.values.data();
    for (std::size_t i = 0; i < c * c; ++i) {
        a[i] = p[i] >= tau ? 1.0 : 0.0;
    }
    CorrelationMatrix m;
    m.values = Tensor(Shape{c, c}, std::move(a));
    m.stage = GraphStage::binary;
    m.tau = tau;
    return m;
}

CorrelationMatrix reweight(const CorrelationMatrix& binary, double p) {
    if (binary.stage != GraphStage::binary) {
        throw UsageError(std::string("reweight expects a binary matrix, got ") +
                         stage_name(binary.stage));
    }
    if (p < 0.0 || p > 1.0) {
        throw ConfigError("p must be in [0, 1], got " + std::to_string(p));
    }
    const std::size_t c = binary.label_count();
    std::vector<double> out(c * c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        double degree = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (j != i) degree += binary.values(i, j);
        }
        if (degree == 0.0) {
            // No surviving neighbors: full weight on self keeps the row
            // stochastic instead of leaking 1-p.
            out[i * c + i] = 1.0;
            continue;
        }
        out[i * c + i] = 1.0 - p;
        const double share = p / degree;
        for (std::size_t j = 0; j < c; ++j) {
            if (j != i && binary.values(i, j) != 0.0) {
                out[i * c + j] = share;
            }
        }
    }
    CorrelationMatrix m;
    m.values = Tensor(Shape{c, c}, std::move(out));
    m.stage = GraphStage::reweighted;
    m.tau = binary.tau;
    m.p = p;
    return m;
}

CorrelationMatrix normalize_adjacency(const CorrelationMatrix& reweighted) {
    if (reweighted.stage != GraphStage::reweighted) {
        throw UsageError(std::string("normalize_adjacency expects a reweighted matrix, got ") +
                         stage_name(reweighted.stage));
    }
    const std::size_t c = reweighted.label_count();
    constexpr double eps = 1e-6; // guards degree-zero rows
    std::vector<double> dinv(c);
    for (std::size_t i = 0; i < c; ++i) {
        double degree = 0.0;
        for (std::size_t j = 0; j < c; ++j) degree += reweighted.values(i, j);
        dinv[i] = 1.0 / std::sqrt(degree + eps);
    }
    std::vector<double> out(c * c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = dinv[i] * reweighted.values(i, j) * dinv[j];
        }
    }
    CorrelationMatrix m;
    m.values = Tensor(Shape{c, c}, std::move(out));
    m.stage = GraphStage::normalized;
    m.tau = reweighted.tau;
    m.p = reweighted.p;
    return m;
}

} // namespace mlgcn
