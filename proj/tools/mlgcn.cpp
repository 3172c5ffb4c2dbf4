#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mlgcn/dataset_io.hpp"
#include "mlgcn/embeddings.hpp"
#include "mlgcn/errors.hpp"
#include "mlgcn/gcn.hpp"
#include "mlgcn/kernels.hpp"
#include "mlgcn/label_graph.hpp"
#include "mlgcn/metrics.hpp"
#include "mlgcn/sweep.hpp"
#include "mlgcn/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Removes everything written by a failed command so a nonzero exit never
// leaves partial artifacts behind.
class ArtifactGuard {
public:
    ~ArtifactGuard() {
        if (committed_) return;
        for (auto it = files_.rbegin(); it != files_.rend(); ++it) {
            std::error_code ec;
            fs::remove(*it, ec);
        }
    }
    fs::path track(fs::path p) {
        files_.push_back(p);
        return p;
    }
    void commit() { committed_ = true; }

private:
    std::vector<fs::path> files_;
    bool committed_ = false;
};

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mlgcn::IoError("cannot open " + path.string() + " for digesting");
    std::ostringstream buf;
    buf << in.rdbuf();
    char hex[19];
    std::snprintf(hex, sizeof hex, "0x%016llx",
                  static_cast<unsigned long long>(fnv1a64(std::move(buf).str())));
    return hex;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mlgcn::IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw mlgcn::IoError("write failed on " + path.string());
}

void write_manifest(ArtifactGuard& guard, const fs::path& out_dir, json manifest) {
    manifest["backend"] = mlgcn::kernels::backend_name(mlgcn::kernels::active_backend());
    write_text(guard.track(out_dir / "manifest.json"), manifest.dump(2) + "\n");
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> values;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) throw mlgcn::ConfigError("empty entry in grid '" + text + "'");
        std::size_t used = 0;
        values.push_back(std::stod(item, &used));
        if (used != item.size())
            throw mlgcn::ConfigError("malformed number '" + item + "' in grid");
    }
    if (values.empty()) throw mlgcn::ConfigError("grid '" + text + "' is empty");
    return values;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
    std::vector<std::size_t> dims;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size() || v <= 0)
            throw mlgcn::ConfigError("malformed layer dimension '" + item + "'");
        dims.push_back(static_cast<std::size_t>(v));
    }
    if (dims.empty()) throw mlgcn::ConfigError("layer dimension list is empty");
    return dims;
}

struct Options {
    std::string annotations;
    std::string features;
    std::string vocab;
    std::string embeddings = "one-hot";
    double tau = 0.4;
    double p = 0.2;
    std::string layer_dims = "1024,2048";
    double slope = 0.2;
    bool final_activation = false;
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t epochs = 100;
    std::size_t decay_every = 40;
    double decay_factor = 0.1;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    std::string rule = "threshold:0.5";
    bool skip_normalization = false;
    std::string out;

    std::string checkpoint;
    std::string eval_annotations;
    std::string eval_features;
    std::string tau_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    std::string p_grid = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::size_t jobs = 1;
    std::size_t k = 5;
    long long query_index = -1;
    std::string query_id;

    std::size_t synth_labels = 10;
    std::size_t synth_dim = 64;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    double strength = 0.9;
    double noise = 0.25;
};

mlgcn::FeatureDataset load_dataset(const std::string& annotations, const std::string& features,
                                   const mlgcn::LabelVocabulary& vocab) {
    mlgcn::FeatureDataset ds;
    ds.vocabulary = vocab;
    ds.samples = mlgcn::io::load_annotations(annotations, vocab);
    ds.features = mlgcn::io::load_features(features, ds.samples.size());
    return ds;
}

mlgcn::EmbeddingMatrix resolve_embeddings(const std::string& spec,
                                          const mlgcn::LabelVocabulary& vocab) {
    if (spec == "one-hot") return mlgcn::build_one_hot_embeddings(vocab);
    return mlgcn::build_label_embeddings(vocab, mlgcn::load_word_vectors(spec));
}

mlgcn::CorrelationMatrix build_adjacency(const std::vector<mlgcn::AnnotatedSample>& samples,
                                         std::size_t label_count, double tau, double p,
                                         bool skip_normalization,
                                         mlgcn::CorrelationMatrix* reweighted_out = nullptr) {
    std::vector<std::vector<std::size_t>> label_sets;
    label_sets.reserve(samples.size());
    for (const auto& s : samples) label_sets.push_back(s.labels);
    const auto stats = mlgcn::count_cooccurrence(label_sets, label_count);
    const auto conditional = mlgcn::conditional_probability(stats);
    const auto binary = mlgcn::binarize(conditional, tau);
    auto reweighted = mlgcn::reweight(binary, p);
    if (reweighted_out) *reweighted_out = reweighted;
    if (skip_normalization) return reweighted;
    return mlgcn::normalize_adjacency(reweighted);
}

json config_json(const Options& o, std::initializer_list<const char*> keys) {
    json cfg = json::object();
    for (const char* key : keys) {
        const std::string k = key;
        if (k == "annotations") cfg[k] = o.annotations;
        else if (k == "features") cfg[k] = o.features;
        else if (k == "vocab") cfg[k] = o.vocab;
        else if (k == "embeddings") cfg[k] = o.embeddings;
        else if (k == "tau") cfg[k] = o.tau;
        else if (k == "p") cfg[k] = o.p;
        else if (k == "layer_dims") cfg[k] = o.layer_dims;
        else if (k == "slope") cfg[k] = o.slope;
        else if (k == "final_activation") cfg[k] = o.final_activation;
        else if (k == "lr0") cfg[k] = o.lr0;
        else if (k == "momentum") cfg[k] = o.momentum;
        else if (k == "weight_decay") cfg[k] = o.weight_decay;
        else if (k == "epochs") cfg[k] = o.epochs;
        else if (k == "decay_every") cfg[k] = o.decay_every;
        else if (k == "decay_factor") cfg[k] = o.decay_factor;
        else if (k == "batch_size") cfg[k] = o.batch_size;
        else if (k == "seed") cfg[k] = o.seed;
        else if (k == "rule") cfg[k] = o.rule;
        else if (k == "skip_normalization") cfg[k] = o.skip_normalization;
        else if (k == "checkpoint") cfg[k] = o.checkpoint;
        else if (k == "eval_annotations") cfg[k] = o.eval_annotations;
        else if (k == "eval_features") cfg[k] = o.eval_features;
        else if (k == "tau_grid") cfg[k] = o.tau_grid;
        else if (k == "p_grid") cfg[k] = o.p_grid;
        else if (k == "jobs") cfg[k] = o.jobs;
        else if (k == "k") cfg[k] = o.k;
        else if (k == "labels") cfg[k] = o.synth_labels;
        else if (k == "dim") cfg[k] = o.synth_dim;
        else if (k == "n_train") cfg[k] = o.n_train;
        else if (k == "n_test") cfg[k] = o.n_test;
        else if (k == "strength") cfg[k] = o.strength;
        else if (k == "noise") cfg[k] = o.noise;
    }
    return cfg;
}

mlgcn::ModelConfig model_config(const Options& o) {
    mlgcn::ModelConfig cfg;
    cfg.layer_dims = parse_dims(o.layer_dims);
    cfg.slope = o.slope;
    cfg.final_activation = o.final_activation;
    cfg.seed = o.seed;
    return cfg;
}

mlgcn::TrainConfig train_config(const Options& o) {
    mlgcn::TrainConfig cfg;
    cfg.lr0 = o.lr0;
    cfg.momentum = o.momentum;
    cfg.weight_decay = o.weight_decay;
    cfg.epochs = o.epochs;
    cfg.decay_every = o.decay_every;
    cfg.decay_factor = o.decay_factor;
    cfg.batch_size = o.batch_size;
    cfg.seed = o.seed;
    return cfg;
}

void run_build_graph(const Options& o) {
    const auto vocab = mlgcn::io::load_vocabulary(o.vocab);
    const auto samples = mlgcn::io::load_annotations(o.annotations, vocab);
    std::vector<std::vector<std::size_t>> label_sets;
    label_sets.reserve(samples.size());
    for (const auto& s : samples) label_sets.push_back(s.labels);

    const auto stats = mlgcn::count_cooccurrence(label_sets, vocab.size());
    const auto conditional = mlgcn::conditional_probability(stats);
    const auto binary = mlgcn::binarize(conditional, o.tau);
    const auto reweighted = mlgcn::reweight(binary, o.p);

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    ArtifactGuard guard;
    mlgcn::io::write_matrix(guard.track(out_dir / "conditional.mlgf"), conditional.values);
    mlgcn::io::write_matrix(guard.track(out_dir / "binary.mlgf"), binary.values);
    mlgcn::io::write_matrix(guard.track(out_dir / "reweighted.mlgf"), reweighted.values);
    json artifacts = json::array({"conditional.mlgf", "binary.mlgf", "reweighted.mlgf"});
    if (!o.skip_normalization) {
        const auto normalized = mlgcn::normalize_adjacency(reweighted);
        mlgcn::io::write_matrix(guard.track(out_dir / "normalized.mlgf"), normalized.values);
        artifacts.push_back("normalized.mlgf");
    }

    json manifest;
    manifest["command"] = "build-graph";
    manifest["config"] =
        config_json(o, {"annotations", "vocab", "tau", "p", "skip_normalization"});
    manifest["inputs"] = {{"annotations", file_digest(o.annotations)},
                          {"vocab", file_digest(o.vocab)}};
    manifest["artifacts"] = artifacts;
    manifest["degenerate_diagonal"] = reweighted.zero_self_weight();
    write_manifest(guard, out_dir, std::move(manifest));
    guard.commit();
    std::cout << "wrote " << artifacts.size() << " matrices to " << out_dir.string() << "\n";
}

void run_train(const Options& o) {
    const auto vocab = mlgcn::io::load_vocabulary(o.vocab);
    const auto data = load_dataset(o.annotations, o.features, vocab);
    const auto adjacency =
        build_adjacency(data.samples, vocab.size(), o.tau, o.p, o.skip_normalization);
    const auto embeddings = resolve_embeddings(o.embeddings, vocab);

    auto model = mlgcn::MlGcnModel::init(adjacency, embeddings, model_config(o));
    auto result = mlgcn::train(std::move(model), data, train_config(o));

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    ArtifactGuard guard;
    const fs::path ckpt_dir = out_dir / "checkpoint";
    fs::create_directories(ckpt_dir);
    guard.track(ckpt_dir / "manifest.txt");
    guard.track(ckpt_dir / "adjacency.mlgf");
    guard.track(ckpt_dir / "embeddings.mlgf");
    for (std::size_t l = 0; l < result.model.layer_count(); ++l)
        guard.track(ckpt_dir / ("layer_" + std::to_string(l) + ".mlgf"));
    mlgcn::save_checkpoint(ckpt_dir, result.model, vocab);
    write_text(guard.track(out_dir / "history.tsv"), mlgcn::format_history(result.history));

    json manifest;
    manifest["command"] = "train";
    manifest["config"] = config_json(
        o, {"annotations", "features", "vocab", "embeddings", "tau", "p", "layer_dims", "slope",
            "final_activation", "lr0", "momentum", "weight_decay", "epochs", "decay_every",
            "decay_factor", "batch_size", "seed", "skip_normalization"});
    manifest["inputs"] = {{"annotations", file_digest(o.annotations)},
                          {"features", file_digest(o.features)},
                          {"vocab", file_digest(o.vocab)}};
    if (o.embeddings != "one-hot") manifest["inputs"]["embeddings"] = file_digest(o.embeddings);
    manifest["artifacts"] = {"checkpoint", "history.tsv"};
    manifest["final_loss"] = result.history.back().mean_loss;
    write_manifest(guard, out_dir, std::move(manifest));
    guard.commit();
    std::cout << "final epoch loss " << result.history.back().mean_loss << ", checkpoint at "
              << ckpt_dir.string() << "\n";
}

void run_evaluate(const Options& o) {
    auto ckpt = mlgcn::load_checkpoint(o.checkpoint);
    const auto data = load_dataset(o.annotations, o.features, ckpt.vocabulary);
    const auto rule = mlgcn::DecisionRule::parse(o.rule);

    const auto w = ckpt.model.generate_classifiers();
    const auto scores = mlgcn::predict_batch(w, data.features);
    const auto truth = mlgcn::io::targets_matrix(data.samples, ckpt.model.label_count());
    const auto report = mlgcn::evaluate_predictions(scores, truth, rule);
    const std::string text = mlgcn::format_report(report);
    std::cout << text;

    if (!o.out.empty()) {
        const fs::path out_dir = o.out;
        fs::create_directories(out_dir);
        ArtifactGuard guard;
        write_text(guard.track(out_dir / "metrics.txt"), text);
        json manifest;
        manifest["command"] = "evaluate";
        manifest["config"] = config_json(o, {"checkpoint", "annotations", "features", "rule"});
        manifest["inputs"] = {{"annotations", file_digest(o.annotations)},
                              {"features", file_digest(o.features)},
                              {"checkpoint_manifest",
                               file_digest(fs::path(o.checkpoint) / "manifest.txt")}};
        manifest["artifacts"] = {"metrics.txt"};
        write_manifest(guard, out_dir, std::move(manifest));
        guard.commit();
    }
}

void run_sweep_cmd(const Options& o) {
    const auto vocab = mlgcn::io::load_vocabulary(o.vocab);
    const auto train_data = load_dataset(o.annotations, o.features, vocab);
    mlgcn::FeatureDataset eval_data;
    const bool separate_eval = !o.eval_annotations.empty();
    if (separate_eval) {
        if (o.eval_features.empty())
            throw mlgcn::ConfigError("--eval-annotations needs --eval-features");
        eval_data = load_dataset(o.eval_annotations, o.eval_features, vocab);
    }
    const auto embeddings = resolve_embeddings(o.embeddings, vocab);

    mlgcn::SweepConfig cfg;
    cfg.tau_grid = parse_grid(o.tau_grid);
    cfg.p_grid = parse_grid(o.p_grid);
    cfg.model = model_config(o);
    cfg.train = train_config(o);
    cfg.rule = mlgcn::DecisionRule::parse(o.rule);
    cfg.skip_normalization = o.skip_normalization;
    cfg.jobs = o.jobs;

    const auto rows =
        mlgcn::run_sweep(train_data, separate_eval ? eval_data : train_data, embeddings, cfg);
    const std::string table = mlgcn::format_sweep(rows);
    std::cout << table;

    if (!o.out.empty()) {
        const fs::path out_dir = o.out;
        fs::create_directories(out_dir);
        ArtifactGuard guard;
        write_text(guard.track(out_dir / "sweep.tsv"), table);
        json manifest;
        manifest["command"] = "sweep";
        manifest["config"] = config_json(
            o, {"annotations", "features", "vocab", "embeddings", "eval_annotations",
                "eval_features", "tau_grid", "p_grid", "layer_dims", "slope", "lr0", "momentum",
                "weight_decay", "epochs", "decay_every", "decay_factor", "batch_size", "seed",
                "rule", "skip_normalization", "jobs"});
        manifest["inputs"] = {{"annotations", file_digest(o.annotations)},
                              {"features", file_digest(o.features)},
                              {"vocab", file_digest(o.vocab)}};
        manifest["artifacts"] = {"sweep.tsv"};
        write_manifest(guard, out_dir, std::move(manifest));
        guard.commit();
    }
}

void run_retrieve(const Options& o) {
    const auto gallery = mlgcn::io::load_features(o.features, 0);
    std::vector<std::string> ids(gallery.dim(0));
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = "row" + std::to_string(i);
    if (!o.annotations.empty()) {
        if (o.vocab.empty()) throw mlgcn::ConfigError("--annotations needs --vocab");
        const auto vocab = mlgcn::io::load_vocabulary(o.vocab);
        const auto samples = mlgcn::io::load_annotations(o.annotations, vocab);
        if (samples.size() != gallery.dim(0))
            throw mlgcn::DataError("annotation count does not match gallery rows");
        for (std::size_t i = 0; i < samples.size(); ++i) ids[i] = samples[i].id;
    }

    std::size_t query = 0;
    if (!o.query_id.empty()) {
        const auto it = std::find(ids.begin(), ids.end(), o.query_id);
        if (it == ids.end())
            throw mlgcn::DataError("query id '" + o.query_id + "' not found in gallery");
        query = static_cast<std::size_t>(it - ids.begin());
    } else if (o.query_index >= 0) {
        query = static_cast<std::size_t>(o.query_index);
        if (query >= gallery.dim(0))
            throw mlgcn::UsageError("query index " + std::to_string(query) +
                                    " outside gallery of " + std::to_string(gallery.dim(0)));
    } else {
        throw mlgcn::ConfigError("retrieve needs --query-index or --query-id");
    }

    const auto neighbors = mlgcn::knn_retrieve(gallery.row(query), gallery, o.k);
    std::cout << "rank\tindex\tid\tdistance\n";
    std::cout.precision(6);
    std::cout.setf(std::ios::fixed);
    for (std::size_t r = 0; r < neighbors.size(); ++r)
        std::cout << (r + 1) << '\t' << neighbors[r].index << '\t' << ids[neighbors[r].index]
                  << '\t' << neighbors[r].distance << '\n';
}

void run_export(const Options& o) {
    auto ckpt = mlgcn::load_checkpoint(o.checkpoint);
    const auto w = ckpt.model.generate_classifiers();
    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    ArtifactGuard guard;
    mlgcn::io::write_matrix(guard.track(out_dir / "classifiers.mlgf"), w);
    mlgcn::io::write_matrix_csv(guard.track(out_dir / "classifiers.csv"), w);
    json manifest;
    manifest["command"] = "export-classifiers";
    manifest["config"] = config_json(o, {"checkpoint"});
    manifest["inputs"] = {
        {"checkpoint_manifest", file_digest(fs::path(o.checkpoint) / "manifest.txt")}};
    manifest["artifacts"] = {"classifiers.mlgf", "classifiers.csv"};
    manifest["shape"] = {w.dim(0), w.dim(1)};
    write_manifest(guard, out_dir, std::move(manifest));
    guard.commit();
    std::cout << "wrote " << w.dim(0) << "x" << w.dim(1) << " classifiers to "
              << out_dir.string() << "\n";
}

void run_synth(const Options& o) {
    if (o.n_train == 0) throw mlgcn::ConfigError("synth needs --n-train >= 1");
    mlgcn::SynthConfig cfg;
    cfg.label_count = o.synth_labels;
    cfg.feature_dim = o.synth_dim;
    cfg.sample_count = o.n_train + o.n_test;
    cfg.strength = o.strength;
    cfg.noise = o.noise;
    cfg.seed = o.seed;
    const auto ds = mlgcn::generate_synthetic(cfg);

    // Train and test come from one draw so both splits share the planted
    // signature directions.
    const std::size_t d = ds.feature_dim();
    std::vector<mlgcn::AnnotatedSample> train_samples(ds.samples.begin(),
                                                      ds.samples.begin() + o.n_train);
    std::vector<mlgcn::AnnotatedSample> test_samples(ds.samples.begin() + o.n_train,
                                                     ds.samples.end());
    const auto split = [&](std::size_t begin, std::size_t count) {
        const auto src = ds.features.data().subspan(begin * d, count * d);
        return mlgcn::make_unchecked({count, d}, std::vector<double>(src.begin(), src.end()));
    };

    const fs::path out_dir = o.out;
    fs::create_directories(out_dir);
    ArtifactGuard guard;
    mlgcn::io::write_vocabulary(guard.track(out_dir / "labels.txt"), ds.vocabulary);
    mlgcn::io::write_annotations(guard.track(out_dir / "train.tsv"), train_samples,
                                 ds.vocabulary);
    mlgcn::io::write_matrix(guard.track(out_dir / "train_features.mlgf"), split(0, o.n_train));
    json artifacts = json::array({"labels.txt", "train.tsv", "train_features.mlgf"});
    if (o.n_test > 0) {
        mlgcn::io::write_annotations(guard.track(out_dir / "test.tsv"), test_samples,
                                     ds.vocabulary);
        mlgcn::io::write_matrix(guard.track(out_dir / "test_features.mlgf"),
                                split(o.n_train, o.n_test));
        artifacts.push_back("test.tsv");
        artifacts.push_back("test_features.mlgf");
    }

    json manifest;
    manifest["command"] = "synth";
    manifest["config"] =
        config_json(o, {"labels", "dim", "n_train", "n_test", "strength", "noise", "seed"});
    manifest["inputs"] = json::object();
    manifest["artifacts"] = artifacts;
    write_manifest(guard, out_dir, std::move(manifest));
    guard.commit();
    std::cout << "wrote " << o.n_train << " train / " << o.n_test << " test samples to "
              << out_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"Label-graph classifier learning pipeline"};
    app.require_subcommand(1);

    const auto add_data_flags = [&](CLI::App* cmd, bool need_features) {
        cmd->add_option("--annotations", o.annotations, "annotation tsv (id<TAB>label,label,...)")
            ->required();
        cmd->add_option("--vocab", o.vocab, "label vocabulary, one name per line")->required();
        if (need_features)
            cmd->add_option("--features", o.features, "feature matrix (.mlgf)")->required();
    };
    const auto add_graph_flags = [&](CLI::App* cmd) {
        cmd->add_option("--tau", o.tau, "binarization threshold");
        cmd->add_option("--p", o.p, "re-weighting neighbor mass");
        cmd->add_flag("--skip-normalization", o.skip_normalization,
                      "use the re-weighted matrix directly");
    };
    const auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--embeddings", o.embeddings, "word-vector file or 'one-hot'");
        cmd->add_option("--layer-dims", o.layer_dims, "comma-separated layer output dims");
        cmd->add_option("--slope", o.slope, "LeakyReLU negative slope");
        cmd->add_flag("--final-activation", o.final_activation,
                      "apply the activation after the last layer too");
    };
    const auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--lr0", o.lr0, "initial learning rate");
        cmd->add_option("--momentum", o.momentum, "momentum coefficient");
        cmd->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
        cmd->add_option("--epochs", o.epochs, "training epochs");
        cmd->add_option("--decay-every", o.decay_every, "epochs between lr decays");
        cmd->add_option("--decay-factor", o.decay_factor, "lr decay factor");
        cmd->add_option("--batch-size", o.batch_size, "mini-batch size");
    };
    const auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", o.seed, "deterministic seed");
    };

    auto* build_graph = app.add_subcommand(
        "build-graph", "Mine the label graph from annotations and write every stage");
    add_data_flags(build_graph, false);
    add_graph_flags(build_graph);
    build_graph->add_option("--out", o.out, "output directory")->required();

    auto* train = app.add_subcommand("train", "Train classifiers end to end");
    add_data_flags(train, true);
    add_graph_flags(train);
    add_model_flags(train);
    add_train_flags(train);
    add_seed(train);
    train->add_option("--out", o.out, "output directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a labeled set");
    evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    evaluate->add_option("--annotations", o.annotations, "annotation tsv")->required();
    evaluate->add_option("--features", o.features, "feature matrix (.mlgf)")->required();
    evaluate->add_option("--rule", o.rule, "decision rule (threshold:T or topk:K)");
    evaluate->add_option("--out", o.out, "optional output directory");

    auto* sweep = app.add_subcommand("sweep", "Grid ablation over tau and p");
    add_data_flags(sweep, true);
    add_model_flags(sweep);
    add_train_flags(sweep);
    add_seed(sweep);
    sweep->add_flag("--skip-normalization", o.skip_normalization,
                    "use the re-weighted matrix directly");
    sweep->add_option("--tau-grid", o.tau_grid, "comma-separated tau values");
    sweep->add_option("--p-grid", o.p_grid, "comma-separated p values");
    sweep->add_option("--eval-annotations", o.eval_annotations,
                      "held-out annotations (defaults to training set)");
    sweep->add_option("--eval-features", o.eval_features, "held-out features");
    sweep->add_option("--rule", o.rule, "decision rule");
    sweep->add_option("--jobs", o.jobs, "worker threads");
    sweep->add_option("--out", o.out, "optional output directory");

    auto* retrieve = app.add_subcommand("retrieve", "Nearest neighbors of a gallery row");
    retrieve->add_option("--features", o.features, "gallery feature matrix (.mlgf)")->required();
    retrieve->add_option("--annotations", o.annotations, "optional annotations for row ids");
    retrieve->add_option("--vocab", o.vocab, "vocabulary (with --annotations)");
    retrieve->add_option("--k", o.k, "neighbors to return");
    retrieve->add_option("--query-index", o.query_index, "gallery row to query");
    retrieve->add_option("--query-id", o.query_id, "sample id to query");

    auto* export_cmd =
        app.add_subcommand("export-classifiers", "Write the classifier matrix of a checkpoint");
    export_cmd->add_option("--checkpoint", o.checkpoint, "checkpoint directory")->required();
    export_cmd->add_option("--out", o.out, "output directory")->required();

    auto* synth = app.add_subcommand("synth", "Generate a planted-correlation dataset");
    synth->add_option("--labels", o.synth_labels, "label count C");
    synth->add_option("--dim", o.synth_dim, "feature dimension D");
    synth->add_option("--n-train", o.n_train, "training samples");
    synth->add_option("--n-test", o.n_test, "test samples");
    synth->add_option("--strength", o.strength, "planted P(partner|anchor)");
    synth->add_option("--noise", o.noise, "feature noise scale");
    add_seed(synth);
    synth->add_option("--out", o.out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build_graph) run_build_graph(o);
        else if (*train) run_train(o);
        else if (*evaluate) run_evaluate(o);
        else if (*sweep) run_sweep_cmd(o);
        else if (*retrieve) run_retrieve(o);
        else if (*export_cmd) run_export(o);
        else if (*synth) run_synth(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
