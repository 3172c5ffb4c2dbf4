#include "mlgcn/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "mlgcn/errors.hpp"
#include "mlgcn/kernels.hpp"

namespace mlgcn {

namespace {

void validate_config(const TrainConfig& c) {
    // lr0 = 0 is allowed deliberately: the null optimizer is the cheapest
    // end-to-end pipeline check there is.
    if (!(c.lr0 >= 0.0)) throw ConfigError("lr0 must be >= 0");
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
    if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (c.epochs == 0) throw ConfigError("epochs must be >= 1");
    if (c.decay_every == 0) throw ConfigError("decay_every must be >= 1");
    if (!(c.decay_factor > 0.0 && c.decay_factor <= 1.0))
        throw ConfigError("decay_factor must lie in (0,1]");
    if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

}  // namespace

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
    if (epoch >= config.epochs)
        throw UsageError("epoch " + std::to_string(epoch) + " outside schedule of " +
                         std::to_string(config.epochs));
    const auto steps = static_cast<double>(epoch / config.decay_every);
    return config.lr0 * std::pow(config.decay_factor, steps);
}

Tensor sgd_update(const Tensor& param, const Tensor& grad, std::vector<double>& velocity,
                  double lr, double momentum, double weight_decay) {
    if (param.shape() != grad.shape())
        throw ShapeError("sgd_update: param " + shape_str(param.shape()) + " vs grad " +
                         shape_str(grad.shape()));
    if (velocity.size() != param.numel())
        throw ShapeError("sgd_update: velocity buffer has " + std::to_string(velocity.size()) +
                         " entries for " + std::to_string(param.numel()) + " parameters");
    for (std::size_t i = 0; i < grad.numel(); ++i)
        if (!std::isfinite(grad[i]))
            throw TrainingError("non-finite gradient at flat index " + std::to_string(i));
    std::vector<double> updated(param.data().begin(), param.data().end());
    kernels::sgd_step(updated.data(), grad.data().data(), velocity.data(), updated.size(), lr,
                      momentum, weight_decay);
    detail::check_finite(updated, "sgd_update");
    return make_unchecked(param.shape(), std::move(updated));
}

std::vector<std::size_t> epoch_order(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    return order;
}

std::string format_history(const TrainHistory& history) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& rec : history) {
        out << rec.epoch << '\t' << rec.mean_loss << '\t' << rec.lr;
        if (rec.validation) out << '\t' << rec.validation->mean_ap;
        out << '\n';
    }
    return std::move(out).str();
}

TrainResult train(MlGcnModel model, const FeatureDataset& data, const TrainConfig& config,
                  const FeatureDataset* validation, const DecisionRule& rule) {
    validate_config(config);
    if (data.size() == 0) throw ConfigError("training dataset is empty");
    if (data.feature_dim() != model.feature_dim())
        throw ConfigError("dataset feature dim " + std::to_string(data.feature_dim()) +
                          " does not match model feature dim " +
                          std::to_string(model.feature_dim()));
    if (data.vocabulary.size() != model.label_count())
        throw ConfigError("dataset vocabulary has " + std::to_string(data.vocabulary.size()) +
                          " labels, model has " + std::to_string(model.label_count()));

    const std::size_t n = data.size();
    const std::size_t c = model.label_count();
    const std::size_t d = model.feature_dim();
    const Tensor targets = io::targets_matrix(data.samples, c);

    Tensor val_truth;
    if (validation) {
        if (validation->feature_dim() != d)
            throw ConfigError("validation feature dim does not match model");
        val_truth = io::targets_matrix(validation->samples, c);
    }

    OptimizerState state;
    for (std::size_t l = 0; l < model.layer_count(); ++l)
        state.velocity.emplace_back(model.weight(l).numel(), 0.0);

    Rng shuffle_rng(config.seed);
    TrainHistory history;
    history.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at_epoch(config, epoch);
        const std::vector<std::size_t> order = epoch_order(n, shuffle_rng);
        double loss_sum = 0.0;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t batch = std::min(config.batch_size, n - start);
            std::vector<double> xb(batch * d), yb(batch * c);
            for (std::size_t row = 0; row < batch; ++row) {
                const std::size_t src = order[start + row];
                const auto x = data.features.data().subspan(src * d, d);
                const auto y = targets.data().subspan(src * c, c);
                std::copy(x.begin(), x.end(), xb.begin() + row * d);
                std::copy(y.begin(), y.end(), yb.begin() + row * c);
            }

            try {
                Tape tape;
                const auto fwd = model.forward(tape);
                const Var features = tape.input(make_unchecked({batch, d}, std::move(xb)));
                const Var scores = tape.matmul(features, tape.transpose(fwd.classifiers));
                const Var loss =
                    tape.bce_with_logits(scores, make_unchecked({batch, c}, std::move(yb)));
                loss_sum += tape.value(loss)[0] * static_cast<double>(batch);
                tape.backward(loss);

                std::vector<Tensor> updated;
                updated.reserve(model.layer_count());
                for (std::size_t l = 0; l < model.layer_count(); ++l)
                    updated.push_back(sgd_update(model.weight(l), tape.grad(fwd.weights[l]),
                                                 state.velocity[l], lr, config.momentum,
                                                 config.weight_decay));
                model.set_weights(std::move(updated));
            } catch (const Error& e) {
                throw TrainingError("epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(start / config.batch_size) + ": " + e.what());
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = loss_sum / static_cast<double>(n);
        rec.lr = lr;
        if (validation) {
            const Tensor w = model.generate_classifiers();
            const Tensor scores = predict_batch(w, validation->features);
            rec.validation = evaluate_predictions(scores, val_truth, rule);
        }
        history.push_back(std::move(rec));
    }

    return TrainResult{std::move(model), std::move(history)};
}

}  // namespace mlgcn
