#pragma once

#include <stdexcept>
#include <string>

namespace arcfit {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input data or configuration is malformed (CLI exit code 2).
class InputError : public Error {
public:
    explicit InputError(const std::string& msg) : Error(msg) {}
};

/// Output could not be written (CLI exit code 3).
class OutputError : public Error {
public:
    explicit OutputError(const std::string& msg) : Error(msg) {}
};

/// Three arc-defining points are collinear beyond tolerance.
class DegenerateArc : public Error {
public:
    DegenerateArc(double sagitta, int segment = -1)
        : Error(segment < 0
                    ? "degenerate arc: sagitta " + std::to_string(sagitta)
                    : "degenerate arc in segment " + std::to_string(segment) +
                          ": sagitta " + std::to_string(sagitta)),
          sagitta(sagitta),
          segment(segment) {}

    double sagitta;
    int segment;  // -1 when not tied to a segment
};

/// Point coincides with the arc center; radial projection undefined.
class AmbiguousProjection : public Error {
public:
    AmbiguousProjection() : Error("point coincides with arc center") {}
};

/// A matrix entry is NaN or infinite.
class NonFiniteValue : public Error {
public:
    NonFiniteValue(int row, int col)
        : Error("non-finite entry at (" + std::to_string(row) + ", " +
                std::to_string(col) + ")"),
          row(row),
          col(col) {}

    int row;
    int col;
};

/// An association boundary referenced data outside the valid range.
class IndexError : public Error {
public:
    explicit IndexError(const std::string& msg) : Error(msg) {}
};

/// A segment owns fewer data points than an arc needs.
class EmptySegment : public Error {
public:
    explicit EmptySegment(int segment)
        : Error("segment " + std::to_string(segment) + " owns fewer than 3 points"),
          segment(segment) {}

    int segment;
};

/// Normal equations are numerically singular with zero damping.
class SingularNormalEquations : public Error {
public:
    SingularNormalEquations() : Error("normal equations numerically singular") {}
};

/// Solver could not make progress (CLI exit code 4).
class SolverFailure : public Error {
public:
    explicit SolverFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace arcfit
