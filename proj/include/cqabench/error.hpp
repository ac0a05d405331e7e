#pragma once

#include <stdexcept>
#include <string>

namespace cqabench {

// Base class for every error raised by the library. `stage()` names the
// pipeline stage so the CLI can print a stage-tagged diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row)
        : Error("load", what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ImputationError : public Error {
public:
    explicit ImputationError(const std::string& what) : Error("impute", what) {}
};

class FeatureError : public Error {
public:
    explicit FeatureError(const std::string& what) : Error("features", what) {}
};

class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error("model", what) {}
};

// Raised when a solver cannot produce finite parameters. Grid cells that hit
// it are reported as N/A instead of aborting the run.
class NonConvergenceError : public ModelError {
public:
    explicit NonConvergenceError(const std::string& what) : ModelError(what) {}
};

class OptimizationError : public Error {
public:
    explicit OptimizationError(const std::string& what) : Error("hpo", what) {}
};

class EvaluationError : public Error {
public:
    explicit EvaluationError(const std::string& what) : Error("evaluation", what) {}
};

class TextError : public Error {
public:
    explicit TextError(const std::string& what) : Error("textprep", what) {}
};

}  // namespace cqabench
