#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mlgcn/embeddings.hpp"
#include "mlgcn/rng.hpp"
#include "mlgcn/tensor.hpp"

namespace mlgcn {

// One annotated example: an external id plus its label indices
// (sorted, deduplicated, all < C).
struct AnnotatedSample {
    std::string id;
    std::vector<std::size_t> labels;
};

// Samples plus their pooled feature vectors. `features` is always N x D
// after loading; rank-3 per-sample maps are max-pooled on the way in.
struct FeatureDataset {
    std::vector<AnnotatedSample> samples;
    Tensor features;  // N x D
    LabelVocabulary vocabulary;

    std::size_t size() const { return samples.size(); }
    std::size_t feature_dim() const { return features.dim(1); }
};

namespace io {

// Binary matrix container: magic "MLGF", then version, rank and dims as
// little-endian u32, then the payload as little-endian IEEE-754 doubles in
// row-major order. Round-trips are bitwise lossless; NaN payloads are
// rejected at write time.
inline constexpr char kMatrixMagic[4] = {'M', 'L', 'G', 'F'};
inline constexpr std::uint32_t kMatrixVersion = 1;

void write_matrix(const std::filesystem::path& path, const Tensor& t);
Tensor read_matrix(const std::filesystem::path& path);

// CSV mirror of the binary content at 17 significant digits (rank 1 or 2).
void write_matrix_csv(const std::filesystem::path& path, const Tensor& t);

// One label name per line, order defines the index space.
LabelVocabulary load_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const std::filesystem::path& path, const LabelVocabulary& vocab);

// Annotation text: one record per line, `id<TAB>label,label,...`.
// Duplicate names within a record collapse silently; an empty label list is
// allowed ("id<TAB>"). Unknown names are data errors with the line number.
std::vector<AnnotatedSample> load_annotations(const std::filesystem::path& path,
                                              const LabelVocabulary& vocab);
void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedSample>& samples,
                       const LabelVocabulary& vocab);

// Feature matrix for a sample list. Accepts rank-2 N x D directly, or a
// rank-4 stack N x D x h x w which is pooled per sample to N x D.
Tensor load_features(const std::filesystem::path& path, std::size_t expected_rows);

// Dense 0/1 target matrix (N x C) from parsed samples.
Tensor targets_matrix(const std::vector<AnnotatedSample>& samples, std::size_t label_count);

}  // namespace io

// Synthetic corpus with planted pairwise co-occurrence: labels are paired
// (0,1), (2,3), ...; each even "anchor" label fires independently, and its
// odd partner follows with probability `strength`. Every label also fires
// as a stray with a small background probability, so the conditional
// probability matrix has a known planted structure. Features are the sum
// of fixed per-label signature directions plus Gaussian noise.
struct SynthConfig {
    std::size_t label_count = 10;   // C, must be >= 2
    std::size_t feature_dim = 64;   // D, must be >= C
    std::size_t sample_count = 1000;
    double strength = 0.9;          // P(partner | anchor)
    double noise = 0.25;            // feature noise scale
    double anchor_prob = 0.35;      // P(anchor fires)
    double stray_prob = 0.05;       // background rate for every label
    std::uint64_t seed = 1;
};

FeatureDataset generate_synthetic(const SynthConfig& config);

}  // namespace mlgcn
