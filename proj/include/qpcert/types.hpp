#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

// lapacke pulls in complex.h whose I macro collides with identity matrices
#if defined(EIGEN_USE_LAPACKE) && defined(I)
#undef I
#endif

namespace qpcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// model
class SingularD : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class UnknownVariable : public Error { public: using Error::Error; };

// algorithms
class InvalidSchedule : public Error { public: using Error::Error; };
class NegativeLambda : public Error { public: using Error::Error; };
class InvalidRho : public Error { public: using Error::Error; };
class InvalidHorizon : public Error { public: using Error::Error; };

// bounds / sets
class UnsupportedNorm : public Error { public: using Error::Error; };
class UnboundedSet : public Error { public: using Error::Error; };

// relax
class MissingBlock : public Error { public: using Error::Error; };
class BothRadiiPositive : public Error { public: using Error::Error; };

// conic
class SolverError : public Error { public: using Error::Error; };
class ParseError : public Error {
public:
  ParseError(const std::string& what, long line)
      : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
  long line;
};

// sample
class NoConvergence : public Error { public: using Error::Error; };
class InvalidParams : public Error { public: using Error::Error; };

// cli
class UnknownFixture : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace qpcert
