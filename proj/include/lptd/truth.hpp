#pragma once

#include <cstddef>
#include <vector>

#include "lptd/rng.hpp"

namespace lptd {

// Plaintext truth discovery: alternate weight updates (log of the total-to-
// individual distance ratio) and weighted-mean truth updates. Serves as the
// ground-truth reference for the secure pipeline.

enum class DataKind { continuous, categorical };

struct ObservationMatrix {
    DataKind kind = DataKind::continuous;
    // continuous: devices x objects
    std::vector<std::vector<double>> values;
    // categorical: chosen candidate per device/object, one-hot implied
    std::vector<std::vector<size_t>> choices;
    size_t num_choices = 0;

    size_t devices() const {
        return kind == DataKind::continuous ? values.size() : choices.size();
    }
    size_t objects() const {
        if (kind == DataKind::continuous) return values.empty() ? 0 : values.front().size();
        return choices.empty() ? 0 : choices.front().size();
    }

    static ObservationMatrix continuous(std::vector<std::vector<double>> values);
    static ObservationMatrix categorical(std::vector<std::vector<size_t>> choices,
                                         size_t num_choices);
};

struct TruthVector {
    DataKind kind = DataKind::continuous;
    std::vector<double> values;               // continuous
    std::vector<std::vector<double>> probs;   // categorical, per-object distribution

    // Final categorical answer: the choice with highest probability.
    std::vector<size_t> winners() const;
};

using WeightVector = std::vector<double>;

struct DeviationVector {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

inline constexpr double kEpsFloor = 1e-9;

double distance_continuous(double obs, double truth, double std_dev);
double distance_categorical(size_t choice, const std::vector<double>& truth_probs);

// Total per-device distances against the current truths.
std::vector<double> device_distances(const ObservationMatrix& obs, const TruthVector& truths,
                                     const DeviationVector& dev);

WeightVector update_weights(const ObservationMatrix& obs, const TruthVector& truths,
                            const DeviationVector& dev);
TruthVector update_truths(const ObservationMatrix& obs, const WeightVector& weights);
DeviationVector std_pass(const ObservationMatrix& obs);

enum class TruthInit { random, mean };

TruthVector initialize_truths(const ObservationMatrix& obs, TruthInit init, Rng& rng);

struct CrhIteration {
    TruthVector truths;
    WeightVector weights;
};

struct CrhResult {
    TruthVector truths;
    WeightVector weights;
    std::vector<CrhIteration> trace;
};

CrhResult run_crh(const ObservationMatrix& obs, size_t iterations, const TruthVector& init,
                  bool early_stop = false);
CrhResult run_crh(const ObservationMatrix& obs, size_t iterations, TruthInit init, Rng& rng,
                  bool early_stop = false);

}  // namespace lptd
