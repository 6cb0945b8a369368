#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace hjbv {

// Small dynamic vectors/matrices with inline storage: state, control and noise
// dimensions in this toolkit never exceed 4, so nothing here touches the heap.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using State = Vec;
using Control = Vec;
using Covector = Vec;

inline Vec scalar_vec(double v) {
    Vec out(1);
    out[0] = v;
    return out;
}

/// Raised when an input violates a documented precondition or invariant.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a finite answer.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace hjbv
