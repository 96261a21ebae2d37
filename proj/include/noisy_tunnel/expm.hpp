#pragma once

// Dense matrix exponential by scaling and squaring with diagonal Pade
// approximants (degrees 3, 5, 7, 9, 13), following Higham's 2005 selection
// thresholds for double precision. Intended for the small fixed-size
// generators used throughout the library.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

namespace noisy_tunnel {

namespace detail {

inline constexpr std::array<double, 5> kPadeTheta = {
    1.495585217958292e-2, // m = 3
    2.539398330063230e-1, // m = 5
    9.504178996162932e-1, // m = 7
    2.097847961257068e0,  // m = 9
    5.371920351148152e0,  // m = 13
};

template <class Mat> Mat pade_3_to_9(const Mat &a, int m) {
  static constexpr double b3[] = {120.0, 60.0, 12.0, 1.0};
  static constexpr double b5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static constexpr double b7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                  25200.0,    1512.0,    56.0,      1.0};
  static constexpr double b9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                  2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  const double *b = m == 3 ? b3 : m == 5 ? b5 : m == 7 ? b7 : b9;

  const Mat ident = Mat::Identity(a.rows(), a.cols());
  const Mat a2 = a * a;
  Mat power = ident;
  Mat u_even = b[1] * ident;
  Mat v = b[0] * ident;
  for (int k = 2; k <= m; k += 2) {
    power = power * a2;
    u_even += b[k + 1] * power;
    v += b[k] * power;
  }
  const Mat u = a * u_even;
  return (v - u).partialPivLu().solve(v + u);
}

template <class Mat> Mat pade_13(const Mat &a) {
  static constexpr double b[] = {64764752532480000.0,
                                 32382376266240000.0,
                                 7771770303897600.0,
                                 1187353796428800.0,
                                 129060195264000.0,
                                 10559470521600.0,
                                 670442572800.0,
                                 33522128640.0,
                                 1323241920.0,
                                 40840800.0,
                                 960960.0,
                                 16380.0,
                                 182.0,
                                 1.0};
  const Mat ident = Mat::Identity(a.rows(), a.cols());
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u_inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  const Mat u = a * (a6 * u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident);
  const Mat v_inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
  const Mat v = a6 * v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
  return (v - u).partialPivLu().solve(v + u);
}

} // namespace detail

/// exp(a) for a square dense matrix. The 1-norm of a selects the Pade degree;
/// norms above the degree-13 threshold are scaled by 2^-s and squared back.
template <class Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived> &a_in) {
  using Mat = typename Derived::PlainObject;
  const Mat a = a_in;
  if (a.rows() != a.cols())
    throw std::invalid_argument("expm: matrix must be square");
  if (!a.allFinite())
    throw std::invalid_argument("expm: matrix has non-finite entries");

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  constexpr int degrees[] = {3, 5, 7, 9};
  for (int i = 0; i < 4; ++i) {
    if (norm1 <= detail::kPadeTheta[i])
      return detail::pade_3_to_9(a, degrees[i]);
  }

  int s = 0;
  if (norm1 > detail::kPadeTheta[4])
    s = static_cast<int>(std::ceil(std::log2(norm1 / detail::kPadeTheta[4])));
  const Mat scaled = a * std::ldexp(1.0, -s);
  Mat result = detail::pade_13(scaled);
  for (int i = 0; i < s; ++i)
    result = result * result;
  return result;
}

} // namespace noisy_tunnel
