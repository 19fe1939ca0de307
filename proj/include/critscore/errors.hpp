#pragma once

#include <stdexcept>
#include <string>

namespace critscore {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// The expected-information matrix failed the positive-definiteness check.
/// At a point where this is unexpected it usually means an undetected
/// critical direction; inspect the spectrum with detect_critical_numeric.
class SingularInformation : public Error {
public:
    SingularInformation(const std::string& msg, double min_eig, double max_eig)
        : Error(msg), min_eigenvalue(min_eig), max_eigenvalue(max_eig) {}
    double min_eigenvalue;
    double max_eigenvalue;
};

/// Design matrix (or GLS normal matrix) is numerically rank deficient.
class RankDeficientDesign : public Error {
public:
    using Error::Error;
};

/// No scan point was accepted when inverting a test into an interval.
class EmptyRegion : public Error {
public:
    using Error::Error;
};

class CsvError : public Error {
public:
    using Error::Error;
};

class MissingColumn : public CsvError {
public:
    explicit MissingColumn(const std::string& column)
        : CsvError("missing column: " + column), column(column) {}
    std::string column;
};

class NonNumericCell : public CsvError {
public:
    NonNumericCell(long row, const std::string& column, const std::string& value)
        : CsvError("non-numeric cell at row " + std::to_string(row) + ", column '" + column +
                   "': \"" + value + "\""),
          row(row), column(column) {}
    long row;  // 1-based data row (header excluded)
    std::string column;
};

class EmptyGroup : public CsvError {
public:
    explicit EmptyGroup(const std::string& group)
        : CsvError("group '" + group + "' has no rows"), group(group) {}
    std::string group;
};

}  // namespace critscore
