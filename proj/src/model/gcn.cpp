#include "mlgcn/gcn.hpp"

#include <fstream>
#include <sstream>

#include "mlgcn/dataset_io.hpp"
#include "mlgcn/errors.hpp"
#include "mlgcn/rng.hpp"

namespace mlgcn {

namespace {

Tensor draw_uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    Tensor t = make_unchecked({fan_in, fan_out}, std::move(w));
    t.set_requires_grad(true);
    return t;
}

}  // namespace

MlGcnModel MlGcnModel::init(CorrelationMatrix adjacency, EmbeddingMatrix embeddings,
                            ModelConfig config) {
    if (config.layer_dims.empty()) throw ConfigError("model needs at least one layer");
    for (std::size_t d : config.layer_dims)
        if (d == 0) throw ConfigError("layer dimensions must be positive");
    Rng rng(config.seed);
    std::vector<GcnLayer> layers;
    std::size_t fan_in = embeddings.dimension();
    for (std::size_t d : config.layer_dims) {
        layers.push_back(GcnLayer{draw_uniform_weight(fan_in, d, rng)});
        fan_in = d;
    }
    return MlGcnModel(std::move(adjacency), std::move(embeddings), std::move(config),
                      std::move(layers));
}

MlGcnModel::MlGcnModel(CorrelationMatrix adjacency, EmbeddingMatrix embeddings,
                       ModelConfig config, std::vector<GcnLayer> layers)
    : adjacency_(std::move(adjacency)),
      embeddings_(std::move(embeddings)),
      config_(std::move(config)),
      layers_(std::move(layers)) {
    validate();
}

void MlGcnModel::validate() const {
    if (config_.layer_dims.empty() || layers_.size() != config_.layer_dims.size())
        throw ConfigError("layer stack does not match configured dimensions");
    if (adjacency_.stage != GraphStage::normalized && adjacency_.stage != GraphStage::reweighted)
        throw ConfigError(std::string("model adjacency must be normalized or reweighted, got ") +
                          stage_name(adjacency_.stage));
    if (adjacency_.values.rank() != 2 || adjacency_.values.dim(0) != adjacency_.values.dim(1))
        throw ShapeError("adjacency must be square, got " + shape_str(adjacency_.values.shape()));
    if (embeddings_.label_count() != adjacency_.label_count())
        throw ConfigError("embeddings cover " + std::to_string(embeddings_.label_count()) +
                          " labels but the adjacency has " +
                          std::to_string(adjacency_.label_count()));
    if (!(config_.slope >= 0.0 && config_.slope < 1.0))
        throw ConfigError("LeakyReLU slope must lie in [0,1)");
    std::size_t fan_in = embeddings_.dimension();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Tensor& w = layers_[l].weight;
        if (w.rank() != 2 || w.dim(0) != fan_in || w.dim(1) != config_.layer_dims[l])
            throw ShapeError("layer " + std::to_string(l) + " weight is " +
                             shape_str(w.shape()) + ", expected " +
                             shape_str({fan_in, config_.layer_dims[l]}));
        fan_in = config_.layer_dims[l];
    }
}

void MlGcnModel::set_weights(std::vector<Tensor> weights) {
    if (weights.size() != layers_.size())
        throw UsageError("set_weights: got " + std::to_string(weights.size()) +
                         " tensors for " + std::to_string(layers_.size()) + " layers");
    std::vector<GcnLayer> fresh;
    fresh.reserve(weights.size());
    for (auto& w : weights) {
        w.set_requires_grad(true);
        fresh.push_back(GcnLayer{std::move(w)});
    }
    std::swap(layers_, fresh);
    validate();
}

Tensor MlGcnModel::generate_classifiers() const {
    Tensor h = embeddings_.values;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = linalg::matmul(linalg::matmul(adjacency_.values, h), layers_[l].weight);
        const bool last = l + 1 == layers_.size();
        if (!last || config_.final_activation) h = linalg::leaky_relu(h, config_.slope);
    }
    return h;
}

MlGcnModel::TapedForward MlGcnModel::forward(Tape& tape) const {
    const Var a = tape.input(adjacency_.values);
    Var h = tape.input(embeddings_.values);
    TapedForward out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Var w = tape.input(layers_[l].weight);
        out.weights.push_back(w);
        h = tape.matmul(tape.matmul(a, h), w);
        const bool last = l + 1 == layers_.size();
        if (!last || config_.final_activation) h = tape.leaky_relu(h, config_.slope);
    }
    out.classifiers = h;
    return out;
}

Tensor predict(const Tensor& classifiers, const Tensor& features) {
    if (features.rank() != 1)
        throw ShapeError("predict: features must be rank-1, got " +
                         shape_str(features.shape()));
    return linalg::matmul(classifiers, features);
}

Tensor predict_batch(const Tensor& classifiers, const Tensor& features) {
    if (features.rank() != 2)
        throw ShapeError("predict_batch: features must be rank-2, got " +
                         shape_str(features.shape()));
    return linalg::matmul(features, linalg::transpose(classifiers));
}

double bce_loss(const Tensor& scores, const Tensor& targets) {
    return linalg::bce_with_logits(scores, targets);
}

namespace {

constexpr const char* kManifestName = "manifest.txt";
constexpr const char* kManifestHeader = "mlgcn-checkpoint 1";

std::string fmt_real(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return std::move(out).str();
}

GraphStage parse_stage(const std::string& text) {
    for (GraphStage s : {GraphStage::conditional, GraphStage::binary, GraphStage::reweighted,
                         GraphStage::normalized}) {
        if (text == stage_name(s)) return s;
    }
    throw FormatError("unknown adjacency stage '" + text + "' in checkpoint manifest");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const MlGcnModel& model,
                     const LabelVocabulary& vocab) {
    if (vocab.size() != model.label_count())
        throw UsageError("vocabulary size " + std::to_string(vocab.size()) +
                         " does not match model label count " +
                         std::to_string(model.label_count()));
    std::filesystem::create_directories(dir);
    io::write_matrix(dir / "adjacency.mlgf", model.adjacency().values);
    io::write_matrix(dir / "embeddings.mlgf", model.embeddings().values);
    for (std::size_t l = 0; l < model.layer_count(); ++l)
        io::write_matrix(dir / ("layer_" + std::to_string(l) + ".mlgf"), model.weight(l));

    const ModelConfig& cfg = model.config();
    std::ostringstream out;
    out << kManifestHeader << '\n';
    out << "layers " << model.layer_count() << '\n';
    out << "layer_dims";
    for (std::size_t d : cfg.layer_dims) out << ' ' << d;
    out << '\n';
    out << "slope " << fmt_real(cfg.slope) << '\n';
    out << "final_activation " << (cfg.final_activation ? 1 : 0) << '\n';
    out << "seed " << cfg.seed << '\n';
    out << "adjacency_stage " << stage_name(model.adjacency().stage) << '\n';
    out << "tau " << fmt_real(model.adjacency().tau) << '\n';
    out << "p " << fmt_real(model.adjacency().p) << '\n';
    out << "embedding_source "
        << (model.embeddings().source == EmbeddingSource::one_hot ? "one-hot" : "word-vectors")
        << '\n';
    out << "labels " << vocab.size() << '\n';
    for (std::size_t i = 0; i < vocab.size(); ++i) out << "label " << vocab.name(i) << '\n';

    std::ofstream file(dir / kManifestName, std::ios::trunc);
    if (!file) throw IoError("cannot write " + (dir / kManifestName).string());
    file << out.str();
    file.flush();
    if (!file) throw IoError("write failed on " + (dir / kManifestName).string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kManifestName;
    std::ifstream file(manifest_path);
    if (!file) throw IoError("cannot open " + manifest_path.string());

    std::string line;
    if (!std::getline(file, line) || line != kManifestHeader)
        throw FormatError(manifest_path.string() + ": not a checkpoint manifest");

    std::size_t layer_count = 0;
    ModelConfig cfg;
    cfg.layer_dims.clear();
    GraphStage stage = GraphStage::normalized;
    double tau = 0.0, p = -1.0;
    EmbeddingSource source = EmbeddingSource::word_vectors;
    std::vector<std::string> labels;
    std::size_t declared_labels = 0;

    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream in(line);
        std::string key;
        in >> key;
        const auto bad = [&](const std::string& why) -> FormatError {
            return FormatError(manifest_path.string() + ":" + std::to_string(line_no) + ": " +
                               why);
        };
        if (key == "layers") {
            if (!(in >> layer_count)) throw bad("malformed layer count");
        } else if (key == "layer_dims") {
            std::size_t d = 0;
            while (in >> d) cfg.layer_dims.push_back(d);
        } else if (key == "slope") {
            if (!(in >> cfg.slope)) throw bad("malformed slope");
        } else if (key == "final_activation") {
            int v = 0;
            if (!(in >> v)) throw bad("malformed final_activation flag");
            cfg.final_activation = v != 0;
        } else if (key == "seed") {
            if (!(in >> cfg.seed)) throw bad("malformed seed");
        } else if (key == "adjacency_stage") {
            std::string s;
            if (!(in >> s)) throw bad("missing adjacency stage");
            stage = parse_stage(s);
        } else if (key == "tau") {
            if (!(in >> tau)) throw bad("malformed tau");
        } else if (key == "p") {
            if (!(in >> p)) throw bad("malformed p");
        } else if (key == "embedding_source") {
            std::string s;
            if (!(in >> s)) throw bad("missing embedding source");
            if (s == "one-hot")
                source = EmbeddingSource::one_hot;
            else if (s == "word-vectors")
                source = EmbeddingSource::word_vectors;
            else
                throw bad("unknown embedding source '" + s + "'");
        } else if (key == "labels") {
            if (!(in >> declared_labels)) throw bad("malformed label count");
        } else if (key == "label") {
            std::string name;
            std::getline(in, name);
            if (!name.empty() && name.front() == ' ') name.erase(0, 1);
            if (name.empty()) throw bad("empty label name");
            labels.push_back(name);
        } else {
            throw bad("unknown manifest key '" + key + "'");
        }
    }
    if (layer_count == 0 || cfg.layer_dims.size() != layer_count)
        throw FormatError(manifest_path.string() + ": layer count and dims disagree");
    if (labels.size() != declared_labels)
        throw FormatError(manifest_path.string() + ": declared " +
                          std::to_string(declared_labels) + " labels, found " +
                          std::to_string(labels.size()));

    CorrelationMatrix adjacency;
    adjacency.values = io::read_matrix(dir / "adjacency.mlgf");
    adjacency.stage = stage;
    adjacency.tau = tau;
    adjacency.p = p;

    EmbeddingMatrix embeddings;
    embeddings.values = io::read_matrix(dir / "embeddings.mlgf");
    embeddings.source = source;

    std::vector<GcnLayer> layers;
    for (std::size_t l = 0; l < layer_count; ++l) {
        Tensor w = io::read_matrix(dir / ("layer_" + std::to_string(l) + ".mlgf"));
        w.set_requires_grad(true);
        layers.push_back(GcnLayer{std::move(w)});
    }

    LoadedCheckpoint out{
        MlGcnModel(std::move(adjacency), std::move(embeddings), std::move(cfg),
                   std::move(layers)),
        LabelVocabulary::from_names(std::move(labels))};
    if (out.vocabulary.size() != out.model.label_count())
        throw FormatError(manifest_path.string() + ": vocabulary size does not match adjacency");
    return out;
}

}  // namespace mlgcn
