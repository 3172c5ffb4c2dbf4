#include "mlgcn/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "mlgcn/errors.hpp"

namespace mlgcn {
namespace io {

namespace {

void append_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_f64_le(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int shift = 0; shift < 64; shift += 8)
        out.push_back(static_cast<char>((bits >> shift) & 0xff));
}

std::uint32_t read_u32_le(const std::string& buf, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | static_cast<std::uint8_t>(buf[offset + static_cast<std::size_t>(i)]);
    return v;
}

double read_f64_le(const std::string& buf, std::size_t offset) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i)
        bits = (bits << 8) | static_cast<std::uint8_t>(buf[offset + static_cast<std::size_t>(i)]);
    return std::bit_cast<double>(bits);
}

[[noreturn]] void format_fail(const std::filesystem::path& path, std::size_t offset,
                              const std::string& what) {
    throw FormatError(path.string() + ": " + what + " (byte " + std::to_string(offset) + ")");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed on " + path.string());
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed on " + path.string());
}

// Strips one trailing '\r' so CRLF files parse the same as LF files.
std::string_view chomp(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const Tensor& t) {
    if (!t.defined()) throw UsageError("write_matrix: tensor is empty");
    for (std::size_t i = 0; i < t.numel(); ++i) {
        if (!std::isfinite(t[i]))
            throw DataError("write_matrix: non-finite value at flat index " + std::to_string(i) +
                            " writing " + path.string());
    }
    if (t.rank() > 0xffffffffu) throw UsageError("write_matrix: rank too large");
    std::string out;
    out.reserve(12 + 4 * t.rank() + 8 * t.numel());
    out.append(kMatrixMagic, 4);
    append_u32_le(out, kMatrixVersion);
    append_u32_le(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) {
        if (d > 0xffffffffu)
            throw UsageError("write_matrix: dimension " + std::to_string(d) +
                             " exceeds the format's 32-bit limit");
        append_u32_le(out, static_cast<std::uint32_t>(d));
    }
    for (std::size_t i = 0; i < t.numel(); ++i) append_f64_le(out, t[i]);
    write_file(path, out);
}

Tensor read_matrix(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 4 || std::memcmp(buf.data(), kMatrixMagic, 4) != 0)
        format_fail(path, 0, "bad magic, not a matrix file");
    if (buf.size() < 8) format_fail(path, 4, "truncated before version field");
    if (const auto version = read_u32_le(buf, 4); version != kMatrixVersion)
        format_fail(path, 4, "unsupported version " + std::to_string(version));
    if (buf.size() < 12) format_fail(path, 8, "truncated before rank field");
    const std::uint32_t rank = read_u32_le(buf, 8);
    if (rank == 0 || rank > 8) format_fail(path, 8, "rank " + std::to_string(rank) + " out of range");

    std::size_t offset = 12;
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i, offset += 4) {
        if (buf.size() < offset + 4)
            format_fail(path, offset, "truncated inside dimension list");
        const std::uint32_t d = read_u32_le(buf, offset);
        if (d == 0) format_fail(path, offset, "zero dimension");
        if (numel > std::numeric_limits<std::size_t>::max() / d)
            format_fail(path, offset, "dimension product overflows");
        shape.push_back(d);
        numel *= d;
    }

    const std::size_t want = offset + 8 * numel;
    if (buf.size() < want)
        format_fail(path, buf.size(),
                    "truncated payload, expected " + std::to_string(want) + " bytes total");
    if (buf.size() > want)
        format_fail(path, want, std::to_string(buf.size() - want) + " trailing bytes after payload");

    std::vector<double> values(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        values[i] = read_f64_le(buf, offset + 8 * i);
        if (std::isnan(values[i]) || std::isinf(values[i]))
            format_fail(path, offset + 8 * i, "non-finite payload value");
    }
    return make_unchecked(std::move(shape), std::move(values));
}

void write_matrix_csv(const std::filesystem::path& path, const Tensor& t) {
    if (!t.defined() || t.rank() > 2)
        throw UsageError("write_matrix_csv: need a rank-1 or rank-2 tensor");
    const std::size_t rows = t.dim(0);
    const std::size_t cols = t.rank() == 2 ? t.dim(1) : 1;
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (j) out << ',';
            out << t[i * cols + j];
        }
        out << '\n';
    }
    write_file(path, std::move(out).str());
}

LabelVocabulary load_vocabulary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        const auto trimmed = chomp(line);
        if (trimmed.empty()) continue;
        names.emplace_back(trimmed);
    }
    if (names.empty()) throw DataError("vocabulary file " + path.string() + " has no labels");
    return LabelVocabulary::from_names(std::move(names));
}

void write_vocabulary(const std::filesystem::path& path, const LabelVocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out += vocab.name(i);
        out += '\n';
    }
    write_file(path, out);
}

std::vector<AnnotatedSample> load_annotations(const std::filesystem::path& path,
                                              const LabelVocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<AnnotatedSample> samples;
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
        const auto line = chomp(raw);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": missing tab between id and labels");
        AnnotatedSample sample;
        sample.id = std::string(line.substr(0, tab));
        if (sample.id.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty sample id");
        std::string_view rest = line.substr(tab + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto token = rest.substr(0, comma);
            if (token.empty())
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": empty label name");
            const auto idx = vocab.find(std::string(token));
            if (!idx)
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": unknown label '" + std::string(token) + "'");
            sample.labels.push_back(*idx);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        std::sort(sample.labels.begin(), sample.labels.end());
        sample.labels.erase(std::unique(sample.labels.begin(), sample.labels.end()),
                            sample.labels.end());
        samples.push_back(std::move(sample));
    }
    return samples;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<AnnotatedSample>& samples,
                       const LabelVocabulary& vocab) {
    std::string out;
    for (const auto& s : samples) {
        out += s.id;
        out += '\t';
        for (std::size_t i = 0; i < s.labels.size(); ++i) {
            if (i) out += ',';
            out += vocab.name(s.labels[i]);
        }
        out += '\n';
    }
    write_file(path, out);
}

Tensor load_features(const std::filesystem::path& path, std::size_t expected_rows) {
    const Tensor raw = read_matrix(path);
    Tensor features;
    if (raw.rank() == 2) {
        features = raw;
    } else if (raw.rank() == 4) {
        // Stack of per-sample maps: pool each one down to a D-vector.
        const std::size_t n = raw.dim(0), d = raw.dim(1);
        const std::size_t spatial = raw.dim(2) * raw.dim(3);
        std::vector<double> pooled(n * d);
        for (std::size_t s = 0; s < n; ++s) {
            const auto* base = raw.data().data() + s * d * spatial;
            std::vector<double> one(base, base + d * spatial);
            const Tensor vec = linalg::global_max_pool(
                make_unchecked({d, raw.dim(2), raw.dim(3)}, std::move(one)));
            std::copy(vec.data().begin(), vec.data().end(), pooled.begin() + s * d);
        }
        features = make_unchecked({n, d}, std::move(pooled));
    } else {
        throw DataError(path.string() + ": features must be rank 2 (N x D) or rank 4 " +
                        "(N x D x h x w), got rank " + std::to_string(raw.rank()));
    }
    if (expected_rows != 0 && features.dim(0) != expected_rows)
        throw DataError(path.string() + ": feature rows (" + std::to_string(features.dim(0)) +
                        ") do not match sample count (" + std::to_string(expected_rows) + ")");
    return features;
}

Tensor targets_matrix(const std::vector<AnnotatedSample>& samples, std::size_t label_count) {
    std::vector<double> y(samples.size() * label_count, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t l : samples[i].labels) {
            if (l >= label_count)
                throw DataError("sample '" + samples[i].id + "' has label index " +
                                std::to_string(l) + " outside vocabulary of size " +
                                std::to_string(label_count));
            y[i * label_count + l] = 1.0;
        }
    }
    return make_unchecked({samples.size(), label_count}, std::move(y));
}

}  // namespace io

FeatureDataset generate_synthetic(const SynthConfig& config) {
    if (config.label_count < 2) throw ConfigError("synthetic: need at least 2 labels");
    if (config.feature_dim < config.label_count)
        throw ConfigError("synthetic: feature_dim must be >= label_count");
    if (config.sample_count == 0) throw ConfigError("synthetic: need at least 1 sample");
    for (double p : {config.strength, config.anchor_prob, config.stray_prob}) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("synthetic: probabilities must lie in [0,1]");
    }
    if (!(config.noise >= 0.0)) throw ConfigError("synthetic: noise must be >= 0");

    const std::size_t c = config.label_count, d = config.feature_dim, n = config.sample_count;
    Rng rng(config.seed);

    // Fixed random unit signature per label, drawn before any sample so the
    // directions depend only on the seed.
    std::vector<double> signatures(c * d);
    for (std::size_t i = 0; i < c; ++i) {
        double norm2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double g = rng.normal();
            signatures[i * d + k] = g;
            norm2 += g * g;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t k = 0; k < d; ++k) signatures[i * d + k] *= inv;
    }

    std::vector<AnnotatedSample> samples;
    samples.reserve(n);
    std::vector<double> features(n * d, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        AnnotatedSample sample;
        sample.id = "s" + std::to_string(s);
        std::vector<bool> has(c, false);
        for (std::size_t a = 0; a + 1 < c; a += 2) {
            if (rng.bernoulli(config.anchor_prob)) {
                has[a] = true;
                if (rng.bernoulli(config.strength)) has[a + 1] = true;
            }
        }
        for (std::size_t l = 0; l < c; ++l)
            if (rng.bernoulli(config.stray_prob)) has[l] = true;
        double* x = features.data() + s * d;
        for (std::size_t l = 0; l < c; ++l) {
            if (!has[l]) continue;
            sample.labels.push_back(l);
            const double* sig = signatures.data() + l * d;
            for (std::size_t k = 0; k < d; ++k) x[k] += sig[k];
        }
        // Noise is drawn unconditionally so the label stream for a seed does
        // not depend on the noise setting.
        for (std::size_t k = 0; k < d; ++k) x[k] += config.noise * rng.normal();
        samples.push_back(std::move(sample));
    }

    std::vector<std::string> names;
    names.reserve(c);
    for (std::size_t i = 0; i < c; ++i) names.push_back("label" + std::to_string(i));

    FeatureDataset ds;
    ds.samples = std::move(samples);
    ds.features = make_unchecked({n, d}, std::move(features));
    ds.vocabulary = LabelVocabulary::from_names(std::move(names));
    return ds;
}

}  // namespace mlgcn
