#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace softroi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when a caller hands us data that violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// File parsing / serialization failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Network-level failures of the remote prompt generator (connection,
// timeout, malformed or contract-violating response). The optimization
// loop treats these as skippable, everything else is fatal.
class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& msg) : std::runtime_error(msg) {}
};

using Rng = std::mt19937_64;

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

// Fan-in scaled uniform init, bound = sqrt(3 / fan_in).
inline Matrix kaiming_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = dist(rng);
    return m;
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace softroi
