#pragma once

#include <stdexcept>
#include <string>

namespace cvote {

/// Invalid or inconsistent run/pipeline configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dataset ingestion failures: missing files, malformed rows, bad tokens.
class IngestionError : public std::runtime_error {
public:
    explicit IngestionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Model-pool persistence failures: version mismatch, truncation, corruption.
class PersistenceError : public std::runtime_error {
public:
    explicit PersistenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when the training loss becomes non-finite.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(int epoch, int batch)
        : std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch(epoch),
          batch(batch) {}

    int epoch;
    int batch;
};

}  // namespace cvote
