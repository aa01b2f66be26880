#pragma once

#include <stdexcept>
#include <string>

namespace qrs {

/// Design matrix is numerically rank deficient (or a subset system is singular).
class singular_design_error : public std::runtime_error {
public:
    explicit singular_design_error(const std::string& what) : std::runtime_error(what) {}
};

/// Iterative solver hit its iteration limit before reaching tolerance.
class non_convergence_error : public std::runtime_error {
public:
    explicit non_convergence_error(const std::string& what) : std::runtime_error(what) {}
};

/// Too few observations for the requested statistic.
class insufficient_data_error : public std::runtime_error {
public:
    explicit insufficient_data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Degenerate distribution or metric (e.g. all residuals equal, zero median).
class degenerate_error : public std::runtime_error {
public:
    explicit degenerate_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qrs
