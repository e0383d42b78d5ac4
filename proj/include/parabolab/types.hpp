#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace parabolab {

using Complex = std::complex<double>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Error hierarchy. Every module reports failures by throwing one of these.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (xi = 0, non-periodic axis, ...).
struct DomainError : Error {
    using Error::Error;
};

// A cylinder or stencil does not contain enough grid nodes to be meaningful.
struct UnderResolvedError : Error {
    using Error::Error;
};

// Estimate ratio requested for data whose right-hand side vanishes.
struct DegenerateInputError : Error {
    using Error::Error;
};

struct CertificateRefused : Error {
    using Error::Error;
};

struct EllipticityError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace parabolab
