#include "mlgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mlgcn/errors.hpp"
#include "mlgcn/kernels.hpp"

namespace mlgcn {

namespace {

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void require_binary(const Tensor& truth) {
    for (std::size_t i = 0; i < truth.numel(); ++i)
        if (truth[i] != 0.0 && truth[i] != 1.0)
            throw DataError("truth matrix must be 0/1, found " + std::to_string(truth[i]));
}

void require_same_shape(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape())
        throw ShapeError("scores " + shape_str(a.shape()) + " and truth " +
                         shape_str(b.shape()) + " must be matching rank-2 matrices");
}

}  // namespace

DecisionRule DecisionRule::thresholded(double t) {
    if (!(t > 0.0 && t < 1.0))
        throw ConfigError("decision threshold must lie in (0,1), got " + std::to_string(t));
    DecisionRule r;
    r.kind = Kind::threshold;
    r.threshold = t;
    return r;
}

DecisionRule DecisionRule::top(std::size_t k) {
    if (k == 0) throw ConfigError("top-k rule needs k >= 1");
    DecisionRule r;
    r.kind = Kind::topk;
    r.k = k;
    return r;
}

DecisionRule DecisionRule::parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ConfigError("decision rule '" + text + "' is not 'threshold:T' or 'topk:K'");
    const std::string kind = text.substr(0, colon);
    const std::string arg = text.substr(colon + 1);
    try {
        if (kind == "threshold") {
            std::size_t used = 0;
            const double t = std::stod(arg, &used);
            if (used != arg.size()) throw std::invalid_argument(arg);
            return thresholded(t);
        }
        if (kind == "topk") {
            std::size_t used = 0;
            const long long k = std::stoll(arg, &used);
            if (used != arg.size() || k < 0) throw std::invalid_argument(arg);
            return top(static_cast<std::size_t>(k));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("decision rule '" + text + "' has a malformed argument");
    }
    throw ConfigError("unknown decision rule kind '" + kind + "'");
}

std::string DecisionRule::str() const {
    std::ostringstream out;
    if (kind == Kind::threshold)
        out << "threshold:" << threshold;
    else
        out << "topk:" << k;
    return out.str();
}

PredictionSet decide_labels(const Tensor& scores, const DecisionRule& rule) {
    if (scores.rank() != 2)
        throw ShapeError("decide_labels: scores must be rank-2, got " + shape_str(scores.shape()));
    const std::size_t b = scores.dim(0), c = scores.dim(1);
    std::vector<double> decided(b * c, 0.0);
    if (rule.kind == DecisionRule::Kind::threshold) {
        std::vector<double> probs(b * c);
        kernels::sigmoid(scores.data().data(), probs.data(), b * c);
        for (std::size_t i = 0; i < b * c; ++i)
            if (probs[i] > rule.threshold) decided[i] = 1.0;
    } else {
        const std::size_t take = std::min(rule.k, c);
        std::vector<std::size_t> order(c);
        for (std::size_t row = 0; row < b; ++row) {
            const double* s = scores.data().data() + row * c;
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [s](std::size_t i, std::size_t j) {
                if (s[i] != s[j]) return s[i] > s[j];
                return i < j;
            });
            for (std::size_t r = 0; r < take; ++r) decided[row * c + order[r]] = 1.0;
        }
    }
    return PredictionSet{scores, make_unchecked({b, c}, std::move(decided)), rule};
}

Prf1 prf1(const PredictionSet& pred, const Tensor& truth, PrfMode mode) {
    require_same_shape(pred.decided, truth);
    require_binary(truth);
    const std::size_t b = truth.dim(0), c = truth.dim(1);
    Prf1 out;
    if (mode == PrfMode::overall) {
        std::size_t tp = 0, predicted = 0, actual = 0;
        for (std::size_t i = 0; i < b * c; ++i) {
            const bool p = pred.decided[i] != 0.0, t = truth[i] != 0.0;
            tp += p && t;
            predicted += p;
            actual += t;
        }
        out.precision = safe_div(static_cast<double>(tp), static_cast<double>(predicted));
        out.recall = safe_div(static_cast<double>(tp), static_cast<double>(actual));
    } else {
        double psum = 0.0, rsum = 0.0;
        for (std::size_t col = 0; col < c; ++col) {
            std::size_t tp = 0, predicted = 0, actual = 0;
            for (std::size_t row = 0; row < b; ++row) {
                const bool p = pred.decided[row * c + col] != 0.0;
                const bool t = truth[row * c + col] != 0.0;
                tp += p && t;
                predicted += p;
                actual += t;
            }
            psum += safe_div(static_cast<double>(tp), static_cast<double>(predicted));
            rsum += safe_div(static_cast<double>(tp), static_cast<double>(actual));
        }
        out.precision = psum / static_cast<double>(c);
        out.recall = rsum / static_cast<double>(c);
    }
    out.f1 = harmonic(out.precision, out.recall);
    return out;
}

MapResult mean_average_precision(const Tensor& scores, const Tensor& truth) {
    require_same_shape(scores, truth);
    require_binary(truth);
    const std::size_t b = scores.dim(0), c = scores.dim(1);
    MapResult result;
    result.per_class.resize(c);
    double sum = 0.0;
    std::size_t counted = 0;
    std::vector<std::size_t> order(b);
    for (std::size_t col = 0; col < c; ++col) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            const double si = scores[i * c + col], sj = scores[j * c + col];
            if (si != sj) return si > sj;
            return i < j;
        });
        std::size_t hits = 0;
        double ap_sum = 0.0;
        for (std::size_t rank = 0; rank < b; ++rank) {
            if (truth[order[rank] * c + col] != 0.0) {
                ++hits;
                ap_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        if (hits > 0) {
            const double ap = ap_sum / static_cast<double>(hits);
            result.per_class[col] = ap;
            sum += ap;
            ++counted;
        }
    }
    if (counted == 0) throw DataError("mean_average_precision: no class has any positive sample");
    result.mean_ap = sum / static_cast<double>(counted);
    return result;
}

MetricsReport evaluate_predictions(const Tensor& scores, const Tensor& truth,
                                   const DecisionRule& rule) {
    const PredictionSet pred = decide_labels(scores, rule);
    const Prf1 per_class = prf1(pred, truth, PrfMode::per_class);
    const Prf1 overall = prf1(pred, truth, PrfMode::overall);
    const MapResult map = mean_average_precision(scores, truth);
    MetricsReport report;
    report.class_precision = per_class.precision;
    report.class_recall = per_class.recall;
    report.class_f1 = per_class.f1;
    report.overall_precision = overall.precision;
    report.overall_recall = overall.recall;
    report.overall_f1 = overall.f1;
    report.mean_ap = map.mean_ap;
    report.per_class_ap = map.per_class;
    report.rule = rule;
    return report;
}

std::string format_report(const MetricsReport& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "CP " << report.class_precision << '\n'
        << "CR " << report.class_recall << '\n'
        << "CF1 " << report.class_f1 << '\n'
        << "OP " << report.overall_precision << '\n'
        << "OR " << report.overall_recall << '\n'
        << "OF1 " << report.overall_f1 << '\n'
        << "mAP " << report.mean_ap << '\n';
    return std::move(out).str();
}

std::vector<Neighbor> knn_retrieve(const Tensor& query, const Tensor& gallery, std::size_t k) {
    if (query.rank() != 1 || gallery.rank() != 2 || gallery.dim(1) != query.dim(0))
        throw ShapeError("knn_retrieve: query " + shape_str(query.shape()) +
                         " does not match gallery " + shape_str(gallery.shape()));
    const std::size_t g = gallery.dim(0), d = gallery.dim(1);
    if (k == 0) throw UsageError("knn_retrieve: k must be >= 1");
    if (k > g)
        throw UsageError("knn_retrieve: k=" + std::to_string(k) + " exceeds gallery size " +
                         std::to_string(g));
    std::vector<Neighbor> all(g);
    for (std::size_t i = 0; i < g; ++i) {
        const double* row = gallery.data().data() + i * d;
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = query[j] - row[j];
            acc += diff * diff;
        }
        all[i] = Neighbor{i, std::sqrt(acc)};
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.index < b.index;
    });
    all.resize(k);
    return all;
}

}  // namespace mlgcn
