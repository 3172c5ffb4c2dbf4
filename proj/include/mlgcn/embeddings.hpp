#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlgcn/tensor.hpp"

namespace mlgcn {

// Word-vector table parsed from text: one token per line followed by
// whitespace-separated reals, dimension fixed by the first line.
struct WordVectorTable {
    std::size_t dimension = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;

    bool contains(const std::string& token) const { return vectors.count(token) != 0; }
};

// Ordered label names; the index order is the canonical label order for
// every matrix in the system.
class LabelVocabulary {
public:
    LabelVocabulary() = default;
    static LabelVocabulary from_names(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(const std::string& name) const;

    // Reordered copy: new index i holds old index perm[i].
    LabelVocabulary permuted(const std::vector<std::size_t>& perm) const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

enum class EmbeddingSource { word_vectors, one_hot };

// Z: one row per label, in vocabulary order.
struct EmbeddingMatrix {
    Tensor values; // C x d
    EmbeddingSource source = EmbeddingSource::word_vectors;

    std::size_t label_count() const { return values.dim(0); }
    std::size_t dimension() const { return values.dim(1); }
};

WordVectorTable load_word_vectors(const std::string& path);

// Lowercases the label name, splits on whitespace and hyphens, and averages
// the token vectors; a token missing from the table is a hard error.
EmbeddingMatrix build_label_embeddings(const LabelVocabulary& vocab,
                                       const WordVectorTable& table);

// One-hot ablation: Z is the C x C identity.
EmbeddingMatrix build_one_hot_embeddings(const LabelVocabulary& vocab);

// Tokenization used for table lookups (exposed for tests).
std::vector<std::string> label_tokens(std::string_view label_name);

} // namespace mlgcn
