#ifndef CARCLUST_ERRORS_HPP
#define CARCLUST_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

/**
 * @file errors.hpp
 * @brief Exception hierarchy shared by every module.
 *
 * All library failures derive from `carclust::Error`, so callers that only
 * need a message can catch the base class. The derived types carry the
 * offending entity (cluster/time pair, file line, variable) as plain fields.
 */

namespace carclust {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidPanel : public Error {
public:
    using Error::Error;
};

class InvalidPartition : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class EmptyCluster : public Error {
public:
    EmptyCluster(std::size_t cluster, std::size_t time)
        : Error("cluster " + std::to_string(cluster + 1) + " is empty at time index " + std::to_string(time + 1)),
          cluster(cluster), time(time) {}

    std::size_t cluster;
    std::size_t time;
};

class DegenerateDesign : public Error {
public:
    using Error::Error;
};

class SingularDesign : public Error {
public:
    using Error::Error;
};

class AllRestartsFailed : public Error {
public:
    using Error::Error;
};

class UndefinedForSingleCluster : public Error {
public:
    UndefinedForSingleCluster() : Error("Calinski-Harabasz index is undefined for a single cluster") {}
};

class ZeroWithinScatter : public Error {
public:
    ZeroWithinScatter() : Error("Calinski-Harabasz index is undefined: within-cluster scatter is zero") {}
};

class SingleTimePoint : public Error {
public:
    SingleTimePoint() : Error("transition matrix needs at least two time points") {}
};

class UnknownUnit : public Error {
public:
    explicit UnknownUnit(const std::string& unit) : Error("unknown unit '" + unit + "'") {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line(line) {}

    std::size_t line;
};

class IncompletePanel : public Error {
public:
    IncompletePanel(const std::string& message, std::string unit, std::string time)
        : Error(message), unit(std::move(unit)), time(std::move(time)) {}

    std::string unit;
    std::string time;
};

class DuplicateRow : public Error {
public:
    DuplicateRow(const std::string& source, std::size_t line, const std::string& unit, const std::string& time)
        : Error(source + ":" + std::to_string(line) + ": duplicate row for unit '" + unit + "' at time '" + time + "'"),
          line(line) {}

    std::size_t line;
};

class ConstantVariable : public Error {
public:
    ConstantVariable(std::size_t variable, const std::string& name)
        : Error("variable '" + name + "' is constant over the whole panel; min-max normalization is undefined"),
          variable(variable) {}

    std::size_t variable;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}

#endif
