#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace hybridsens {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

template <class S> using VecT = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S> using MatT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* name() const noexcept { return "Error"; }
};

#define HYBRIDSENS_ERROR(Name)                                                   \
    class Name : public Error {                                                  \
    public:                                                                      \
        explicit Name(const std::string& what) : Error(what) {}                  \
        const char* name() const noexcept override { return #Name; }             \
    };

HYBRIDSENS_ERROR(DimensionError)
HYBRIDSENS_ERROR(EvaluationError)
HYBRIDSENS_ERROR(SingularMassError)
HYBRIDSENS_ERROR(GrazingError)
HYBRIDSENS_ERROR(StiffnessError)
HYBRIDSENS_ERROR(ZenoSuspectedError)
HYBRIDSENS_ERROR(TwinMismatchError)
HYBRIDSENS_ERROR(UnsupportedModelError)
HYBRIDSENS_ERROR(ConfigurationError)

#undef HYBRIDSENS_ERROR

class RankDeficiencyError : public Error {
public:
    RankDeficiencyError(const std::string& what, int rank) : Error(what), rank_(rank) {}
    const char* name() const noexcept override { return "RankDeficiencyError"; }
    int rank() const noexcept { return rank_; }

private:
    int rank_;
};

/// Diagnostic sink; defaults to std::clog. Pass an empty function to silence.
void set_log_sink(std::function<void(std::string_view)> sink);
void log_message(std::string_view msg);

}  // namespace hybridsens
