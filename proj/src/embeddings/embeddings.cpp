#include "mlgcn/embeddings.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "mlgcn/errors.hpp"

namespace mlgcn {

LabelVocabulary LabelVocabulary::from_names(std::vector<std::string> names) {
    LabelVocabulary v;
    v.names_ = std::move(names);
    for (std::size_t i = 0; i < v.names_.size(); ++i) {
        if (v.names_[i].empty()) {
            throw DataError("vocabulary entry " + std::to_string(i) + " is empty");
        }
        if (!v.index_.emplace(v.names_[i], i).second) {
            throw DataError("duplicate label name: " + v.names_[i]);
        }
    }
    return v;
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

LabelVocabulary LabelVocabulary::permuted(const std::vector<std::size_t>& perm) const {
    if (perm.size() != names_.size()) {
        throw UsageError("permutation size does not match vocabulary size");
    }
    std::vector<std::string> reordered(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) reordered[i] = names_[perm[i]];
    return from_names(std::move(reordered));
}

WordVectorTable load_word_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open word-vector file: " + path);
    WordVectorTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        std::vector<double> vec;
        double value = 0.0;
        while (fields >> value) vec.push_back(value);
        if (!fields.eof()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": malformed number");
        }
        if (vec.empty()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": token without values");
        }
        if (table.dimension == 0) {
            table.dimension = vec.size();
        } else if (vec.size() != table.dimension) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(table.dimension) + " values, got " +
                            std::to_string(vec.size()));
        }
        table.vectors.insert_or_assign(std::move(token), std::move(vec));
    }
    if (table.vectors.empty()) {
        throw DataError("word-vector file is empty: " + path);
    }
    return table;
}

std::vector<std::string> label_tokens(std::string_view label_name) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : label_name) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u) || ch == '-') {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

EmbeddingMatrix build_label_embeddings(const LabelVocabulary& vocab,
                                       const WordVectorTable& table) {
    const std::size_t c = vocab.size();
    const std::size_t d = table.dimension;
    if (c == 0) throw DataError("vocabulary is empty");
    std::vector<double> z(c * d, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        const auto tokens = label_tokens(vocab.name(i));
        if (tokens.empty()) {
            throw DataError("label '" + vocab.name(i) + "' has no tokens");
        }
        for (const auto& token : tokens) {
            const auto it = table.vectors.find(token);
            if (it == table.vectors.end()) {
                throw DataError("label '" + vocab.name(i) + "': token '" + token +
                                "' missing from the word-vector table");
            }
            for (std::size_t k = 0; k < d; ++k) z[i * d + k] += it->second[k];
        }
        const double count = static_cast<double>(tokens.size());
        for (std::size_t k = 0; k < d; ++k) z[i * d + k] /= count;
    }
    EmbeddingMatrix m;
    m.values = Tensor(Shape{c, d}, std::move(z));
    m.source = EmbeddingSource::word_vectors;
    return m;
}

EmbeddingMatrix build_one_hot_embeddings(const LabelVocabulary& vocab) {
    if (vocab.size() == 0) throw DataError("vocabulary is empty");
    EmbeddingMatrix m;
    m.values = Tensor::identity(vocab.size());
    m.source = EmbeddingSource::one_hot;
    return m;
}

} // namespace mlgcn
