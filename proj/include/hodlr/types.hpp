#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

namespace hodlr {

using Index = std::ptrdiff_t;

template <class T>
struct is_complex : std::false_type {};
template <class R>
struct is_complex<std::complex<R>> : std::true_type {};
template <class T>
inline constexpr bool is_complex_v = is_complex<T>::value;

template <class T>
struct real_of {
  using type = T;
};
template <class R>
struct real_of<std::complex<R>> {
  using type = R;
};
template <class T>
using real_t = typename real_of<T>::type;

template <class T>
concept Scalar = std::is_same_v<T, float> || std::is_same_v<T, double> ||
                 std::is_same_v<T, std::complex<float>> ||
                 std::is_same_v<T, std::complex<double>>;

template <class T>
constexpr T conj(T x) {
  if constexpr (is_complex_v<T>) {
    return std::conj(x);
  } else {
    return x;
  }
}

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MatrixMap = Eigen::Map<Matrix<T>, 0, Eigen::OuterStride<>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>, 0, Eigen::OuterStride<>>;

/// Scalar field tag, used in the binary format and the benchmark config.
enum class Field : std::uint32_t {
  real32 = 1,
  real64 = 2,
  complex64 = 3,
  complex128 = 4,
};

template <class T>
constexpr Field field_of() {
  if constexpr (std::is_same_v<T, float>) return Field::real32;
  if constexpr (std::is_same_v<T, double>) return Field::real64;
  if constexpr (std::is_same_v<T, std::complex<float>>) return Field::complex64;
  if constexpr (std::is_same_v<T, std::complex<double>>) return Field::complex128;
}

std::string to_string(Field f);

/// A (near-)singular diagonal or coupling block met during factorization.
class SingularBlockError : public std::runtime_error {
 public:
  SingularBlockError(const std::string& what, int level, Index node)
      : std::runtime_error(what), level_(level), node_(node) {}
  /// Tree level of the offending block; the leaf level for diagonal blocks.
  int level() const { return level_; }
  Index node() const { return node_; }

 private:
  int level_;
  Index node_;
};

/// Non-finite value produced by an entry oracle.
class NonFiniteEntryError : public std::runtime_error {
 public:
  NonFiniteEntryError(Index i, Index j)
      : std::runtime_error("entry oracle returned a non-finite value at (" +
                           std::to_string(i) + ", " + std::to_string(j) + ")"),
        row_(i),
        col_(j) {}
  Index row() const { return row_; }
  Index col() const { return col_; }

 private:
  Index row_;
  Index col_;
};

}  // namespace hodlr
