#include "lptd/truth.hpp"

#include <algorithm>
#include <cmath>

#include "lptd/errors.hpp"

namespace lptd {

ObservationMatrix ObservationMatrix::continuous(std::vector<std::vector<double>> values) {
    if (values.empty() || values.front().empty())
        raise(Errc::config_error, "observation matrix must be K >= 1 by M >= 1");
    size_t m = values.front().size();
    for (const auto& row : values)
        if (row.size() != m) raise(Errc::config_error, "ragged observation matrix");
    ObservationMatrix out;
    out.kind = DataKind::continuous;
    out.values = std::move(values);
    return out;
}

ObservationMatrix ObservationMatrix::categorical(std::vector<std::vector<size_t>> choices,
                                                 size_t num_choices) {
    if (choices.empty() || choices.front().empty())
        raise(Errc::config_error, "observation matrix must be K >= 1 by M >= 1");
    if (num_choices < 2) raise(Errc::config_error, "need at least two candidate choices");
    size_t m = choices.front().size();
    for (const auto& row : choices) {
        if (row.size() != m) raise(Errc::config_error, "ragged observation matrix");
        for (size_t q : row)
            if (q >= num_choices) raise(Errc::config_error, "choice index out of range");
    }
    ObservationMatrix out;
    out.kind = DataKind::categorical;
    out.choices = std::move(choices);
    out.num_choices = num_choices;
    return out;
}

std::vector<size_t> TruthVector::winners() const {
    std::vector<size_t> out;
    out.reserve(probs.size());
    for (const auto& p : probs)
        out.push_back(static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin()));
    return out;
}

double distance_continuous(double obs, double truth, double std_dev) {
    double diff = obs - truth;
    return diff * diff / std::max(std_dev, kEpsFloor);
}

double distance_categorical(size_t choice, const std::vector<double>& truth_probs) {
    double d = 0;
    for (size_t i = 0; i < truth_probs.size(); ++i) {
        double e = (i == choice ? 1.0 : 0.0) - truth_probs[i];
        d += e * e;
    }
    return d;
}

std::vector<double> device_distances(const ObservationMatrix& obs, const TruthVector& truths,
                                     const DeviationVector& dev) {
    size_t k = obs.devices(), m = obs.objects();
    std::vector<double> dist(k, 0.0);
    for (size_t d = 0; d < k; ++d) {
        for (size_t o = 0; o < m; ++o) {
            if (obs.kind == DataKind::continuous)
                dist[d] += distance_continuous(obs.values[d][o], truths.values[o], dev.std_dev[o]);
            else
                dist[d] += distance_categorical(obs.choices[d][o], truths.probs[o]);
        }
        dist[d] = std::max(dist[d], kEpsFloor);
    }
    return dist;
}

WeightVector update_weights(const ObservationMatrix& obs, const TruthVector& truths,
                            const DeviationVector& dev) {
    auto dist = device_distances(obs, truths, dev);
    double total = 0;
    for (double d : dist) total += d;
    WeightVector w(dist.size());
    for (size_t k = 0; k < dist.size(); ++k) w[k] = std::max(std::log(total / dist[k]), kEpsFloor);
    return w;
}

TruthVector update_truths(const ObservationMatrix& obs, const WeightVector& weights) {
    size_t k = obs.devices(), m = obs.objects();
    if (weights.size() != k) raise(Errc::config_error, "weight vector length != devices");
    double total = 0;
    for (double w : weights) total += w;
    if (total <= 0) raise(Errc::degenerate_weights, "weight sum must be positive");

    TruthVector out;
    out.kind = obs.kind;
    if (obs.kind == DataKind::continuous) {
        out.values.assign(m, 0.0);
        for (size_t o = 0; o < m; ++o) {
            double acc = 0;
            for (size_t d = 0; d < k; ++d) acc += weights[d] * obs.values[d][o];
            out.values[o] = acc / total;
        }
    } else {
        out.probs.assign(m, std::vector<double>(obs.num_choices, 0.0));
        for (size_t o = 0; o < m; ++o) {
            for (size_t d = 0; d < k; ++d) out.probs[o][obs.choices[d][o]] += weights[d];
            for (double& p : out.probs[o]) p /= total;
        }
    }
    return out;
}

DeviationVector std_pass(const ObservationMatrix& obs) {
    size_t k = obs.devices(), m = obs.objects();
    DeviationVector dev;
    dev.mean.assign(m, 0.0);
    dev.std_dev.assign(m, 1.0);
    if (obs.kind == DataKind::categorical) return dev;  // vector distances need no deviation
    for (size_t o = 0; o < m; ++o) {
        double acc = 0;
        for (size_t d = 0; d < k; ++d) acc += obs.values[d][o];
        dev.mean[o] = acc / static_cast<double>(k);
        double var = 0;
        for (size_t d = 0; d < k; ++d) {
            double diff = obs.values[d][o] - dev.mean[o];
            var += diff * diff;
        }
        dev.std_dev[o] = std::max(std::sqrt(var / static_cast<double>(k)), kEpsFloor);
    }
    return dev;
}

TruthVector initialize_truths(const ObservationMatrix& obs, TruthInit init, Rng& rng) {
    size_t m = obs.objects();
    TruthVector out;
    out.kind = obs.kind;
    if (obs.kind == DataKind::continuous) {
        out.values.resize(m);
        if (init == TruthInit::mean) {
            out.values = std_pass(obs).mean;
        } else {
            for (size_t o = 0; o < m; ++o) {
                double lo = obs.values[0][o], hi = obs.values[0][o];
                for (const auto& row : obs.values) {
                    lo = std::min(lo, row[o]);
                    hi = std::max(hi, row[o]);
                }
                out.values[o] = lo == hi ? lo : rng.uniform(lo, hi);
            }
        }
    } else {
        out.probs.assign(m, std::vector<double>(obs.num_choices, 0.0));
        for (size_t o = 0; o < m; ++o) {
            if (init == TruthInit::mean) {
                for (double& p : out.probs[o]) p = 1.0 / static_cast<double>(obs.num_choices);
            } else {
                out.probs[o][static_cast<size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(obs.num_choices) - 1))] = 1.0;
            }
        }
    }
    return out;
}

namespace {

double max_truth_delta(const TruthVector& a, const TruthVector& b) {
    double d = 0;
    if (a.kind == DataKind::continuous) {
        for (size_t i = 0; i < a.values.size(); ++i)
            d = std::max(d, std::fabs(a.values[i] - b.values[i]));
    } else {
        for (size_t i = 0; i < a.probs.size(); ++i)
            for (size_t j = 0; j < a.probs[i].size(); ++j)
                d = std::max(d, std::fabs(a.probs[i][j] - b.probs[i][j]));
    }
    return d;
}

}  // namespace

CrhResult run_crh(const ObservationMatrix& obs, size_t iterations, const TruthVector& init,
                  bool early_stop) {
    if (iterations < 1) raise(Errc::config_error, "need at least one iteration");
    DeviationVector dev = std_pass(obs);
    CrhResult res;
    res.truths = init;
    for (size_t it = 0; it < iterations; ++it) {
        res.weights = update_weights(obs, res.truths, dev);
        TruthVector next = update_truths(obs, res.weights);
        double delta = max_truth_delta(next, res.truths);
        res.truths = std::move(next);
        res.trace.push_back({res.truths, res.weights});
        if (early_stop && delta < 1e-6) break;
    }
    return res;
}

CrhResult run_crh(const ObservationMatrix& obs, size_t iterations, TruthInit init, Rng& rng,
                  bool early_stop) {
    return run_crh(obs, iterations, initialize_truths(obs, init, rng), early_stop);
}

}  // namespace lptd
