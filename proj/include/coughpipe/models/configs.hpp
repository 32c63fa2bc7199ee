#pragma once

#include <cstdint>
#include <stdexcept>

#include <json.hpp>

namespace coughpipe::models {

/// Classifier hyperparameters (alpha1..alpha7). The grid-search ranges are
/// conv filters {24,48,96}, kernel {2,3}, dropout {0.1,0.3,0.5}, dense
/// units {16,32}, LSTM units {64,128,256}, learning rate {1e-2,1e-3,1e-4}
/// and batch size {64,128,256}; direct construction accepts any values.
struct ClassifierConfig {
    int conv_filters = 48;     // alpha1
    int kernel_size = 2;       // alpha2
    double dropout_rate = 0.3; // alpha3
    int dense_units = 32;      // alpha4
    int lstm_units = 128;      // alpha5
    double learning_rate = 1e-3;  // alpha6
    int batch_size = 128;      // alpha7

    bool operator==(const ClassifierConfig&) const = default;
};

inline nlohmann::json classifier_config_to_json(const ClassifierConfig& c) {
    return {{"conv_filters", c.conv_filters},   {"kernel_size", c.kernel_size},
            {"dropout_rate", c.dropout_rate},   {"dense_units", c.dense_units},
            {"lstm_units", c.lstm_units},       {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size}};
}

inline ClassifierConfig classifier_config_from_json(const nlohmann::json& j) {
    ClassifierConfig c;
    c.conv_filters = j.value("conv_filters", c.conv_filters);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.dense_units = j.value("dense_units", c.dense_units);
    c.lstm_units = j.value("lstm_units", c.lstm_units);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    return c;
}

struct TrainConfig {
    int max_epochs = 200;
    int patience = 10;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;  // patient-disjoint slice of the training fold
    double learning_rate = 1e-3;       // alpha6
    int batch_size = 128;              // alpha7

    void validate() const {
        if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
        if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
        if (validation_fraction < 0.0 || validation_fraction >= 1.0) {
            throw std::invalid_argument("TrainConfig: validation_fraction must be in [0, 1)");
        }
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    return {{"max_epochs", c.max_epochs},       {"patience", c.patience},
            {"seed", c.seed},                   {"validation_fraction", c.validation_fraction},
            {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    return c;
}

}  // namespace coughpipe::models
