#include "mlgcn/sweep.hpp"

#include <atomic>
#include <sstream>
#include <thread>

#include "mlgcn/errors.hpp"
#include "mlgcn/label_graph.hpp"

namespace mlgcn {

namespace {

SweepRow run_point(const CorrelationMatrix& conditional, const EmbeddingMatrix& embeddings,
                   const FeatureDataset& train_data, const FeatureDataset& eval_data,
                   const SweepConfig& config, double tau, double p) {
    SweepRow row;
    row.tau = tau;
    row.p = p;
    try {
        const CorrelationMatrix binary = binarize(conditional, tau);
        const CorrelationMatrix reweighted = reweight(binary, p);
        row.degenerate_diagonal = reweighted.zero_self_weight();
        const CorrelationMatrix adjacency =
            config.skip_normalization ? reweighted : normalize_adjacency(reweighted);

        MlGcnModel model = MlGcnModel::init(adjacency, embeddings, config.model);
        TrainResult result = train(std::move(model), train_data, config.train);
        row.final_loss = result.history.back().mean_loss;

        const Tensor w = result.model.generate_classifiers();
        const Tensor scores = predict_batch(w, eval_data.features);
        const Tensor truth = io::targets_matrix(eval_data.samples, result.model.label_count());
        row.metrics = evaluate_predictions(scores, truth, config.rule);
    } catch (const std::exception& e) {
        row.status = e.what();
    }
    return row;
}

}  // namespace

std::vector<SweepRow> run_sweep(const FeatureDataset& train_data,
                                const FeatureDataset& eval_data, const EmbeddingMatrix& embeddings,
                                const SweepConfig& config) {
    if (config.tau_grid.empty() || config.p_grid.empty())
        throw ConfigError("sweep needs at least one tau and one p value");
    if (config.jobs == 0) throw ConfigError("sweep needs at least one worker");

    std::vector<std::vector<std::size_t>> label_sets;
    label_sets.reserve(train_data.size());
    for (const auto& s : train_data.samples) label_sets.push_back(s.labels);
    const CooccurrenceStats stats =
        count_cooccurrence(label_sets, train_data.vocabulary.size());
    const CorrelationMatrix conditional = conditional_probability(stats);

    std::vector<std::pair<double, double>> grid;
    for (double tau : config.tau_grid)
        for (double p : config.p_grid) grid.emplace_back(tau, p);

    std::vector<SweepRow> rows(grid.size());
    const auto worker_count = std::min<std::size_t>(config.jobs, grid.size());
    if (worker_count <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            rows[i] = run_point(conditional, embeddings, train_data, eval_data, config,
                                grid[i].first, grid[i].second);
        return rows;
    }

    std::atomic<std::size_t> next{0};
    auto pump = [&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1))
            rows[i] = run_point(conditional, embeddings, train_data, eval_data, config,
                                grid[i].first, grid[i].second);
    };
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (std::size_t t = 0; t < worker_count; ++t) workers.emplace_back(pump);
    for (auto& w : workers) w.join();
    return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "tau\tp\tdegenerate\tstatus\tCP\tCR\tCF1\tOP\tOR\tOF1\tmAP\tfinal_loss\n";
    for (const auto& row : rows) {
        out << row.tau << '\t' << row.p << '\t' << (row.degenerate_diagonal ? 1 : 0) << '\t'
            << row.status;
        if (row.metrics) {
            const auto& m = *row.metrics;
            out.setf(std::ios::fixed);
            out.precision(4);
            out << '\t' << m.class_precision << '\t' << m.class_recall << '\t' << m.class_f1
                << '\t' << m.overall_precision << '\t' << m.overall_recall << '\t' << m.overall_f1
                << '\t' << m.mean_ap;
            out.unsetf(std::ios::fixed);
            out.precision(6);
        } else {
            out << "\t-\t-\t-\t-\t-\t-\t-";
        }
        if (row.final_loss) {
            out.setf(std::ios::fixed);
            out.precision(6);
            out << '\t' << *row.final_loss;
            out.unsetf(std::ios::fixed);
        } else {
            out << "\t-";
        }
        out << '\n';
    }
    return std::move(out).str();
}

}  // namespace mlgcn
