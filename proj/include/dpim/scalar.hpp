#pragma once

#include <complex>
#include <limits>

#include <Eigen/Dense>
#include <boost/multiprecision/float128.hpp>

// Eigen 3.4 needs infinity() and quiet_NaN() in NumTraits, which the
// adaptor shipped with Boost 1.74 does not provide.
namespace Eigen {
template <>
struct NumTraits<boost::multiprecision::float128>
    : GenericNumTraits<boost::multiprecision::float128> {
  using Real = boost::multiprecision::float128;
  using NonInteger = Real;
  using Literal = Real;
  using Nested = Real;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8
  };
  static Real epsilon() { return std::numeric_limits<Real>::epsilon(); }
  static Real dummy_precision() { return Real(1e-28); }
  static Real highest() { return std::numeric_limits<Real>::max(); }
  static Real lowest() { return -std::numeric_limits<Real>::max(); }
  static Real infinity() { return std::numeric_limits<Real>::infinity(); }
  static Real quiet_NaN() { return std::numeric_limits<Real>::quiet_NaN(); }
  static int digits10() { return std::numeric_limits<Real>::digits10; }
};
}  // namespace Eigen

namespace dpim {

using quad = boost::multiprecision::float128;
using cd = std::complex<double>;

template <class R>
using MatR = Eigen::Matrix<R, Eigen::Dynamic, Eigen::Dynamic>;
template <class R>
using VecR = Eigen::Matrix<R, Eigen::Dynamic, 1>;
template <class R>
using MatC = Eigen::Matrix<std::complex<R>, Eigen::Dynamic, Eigen::Dynamic>;
template <class R>
using VecC = Eigen::Matrix<std::complex<R>, Eigen::Dynamic, 1>;

template <class R>
inline double to_double(const R& x) {
  return static_cast<double>(x);
}
template <class R>
inline cd to_cd(const std::complex<R>& z) {
  return {static_cast<double>(z.real()), static_cast<double>(z.imag())};
}

}  // namespace dpim
