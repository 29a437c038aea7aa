#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace wgnet {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid input: schema violations, invariant violations, bad files.
class InputError : public Error {
public:
    explicit InputError(const std::string& what, std::string subject = {})
        : Error(subject.empty() ? what : subject + ": " + what), subject_(std::move(subject)) {}

    /// Id of the vertex/edge/lead/file the error refers to (may be empty).
    const std::string& subject() const noexcept { return subject_; }

private:
    std::string subject_;
};

/// A request that is well formed but not applicable (wrong graph type, bad interval).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-convergence, singular factorizations.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The secular system is singular up to tolerance: lambda sits on the graph spectrum.
class SpectralPointError : public NumericalError {
public:
    SpectralPointError(const std::string& what, double sigma_min)
        : NumericalError(what), sigma_min_(sigma_min) {}
    double sigma_min() const noexcept { return sigma_min_; }

private:
    double sigma_min_;
};

/// sqrt with the branch Im >= 0, independent of the sign of a zero imaginary part.
inline cplx sqrt_upper(cplx z) {
    cplx r = std::sqrt(cplx(z.real(), std::abs(z.imag()) == 0.0 ? 0.0 : z.imag()));
    if (r.imag() < 0.0) r = -r;
    return r;
}

/// Largest singular value.
inline double operator_norm(const CMatrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(m);
    return svd.singularValues()(0);
}

}  // namespace wgnet
