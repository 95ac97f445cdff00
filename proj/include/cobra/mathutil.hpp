#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

namespace cobra {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Component-wise compensated mean of 3-vectors.
template <typename Iterable>
Eigen::Vector3d compensated_mean(const Iterable& points, std::size_t count) {
  CompensatedSum sx, sy, sz;
  for (const auto& p : points) {
    sx.add(p.x());
    sy.add(p.y());
    sz.add(p.z());
  }
  const double n = static_cast<double>(count);
  return {sx.value() / n, sy.value() / n, sz.value() / n};
}

/// Deterministic sign convention for an axis with no temporal reference:
/// nonnegative dot with +x, ties cascading to +y then +z.
inline Eigen::Vector3d lexicographic_sign_fix(const Eigen::Vector3d& v) {
  if (v.x() > 0.0) return v;
  if (v.x() < 0.0) return -v;
  if (v.y() > 0.0) return v;
  if (v.y() < 0.0) return -v;
  if (v.z() < 0.0) return -v;
  return v;
}

/// max(|R^T R - I|, |det R - 1|)
inline double rotation_error(const Eigen::Matrix3d& R) {
  const Eigen::Matrix3d gram = R.transpose() * R - Eigen::Matrix3d::Identity();
  return std::max(gram.cwiseAbs().maxCoeff(), std::abs(R.determinant() - 1.0));
}

/// Relative rotation angle between two rotation matrices, radians.
inline double rotation_angle(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Angle between two vectors, radians.
inline double vector_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = a.dot(b) / (a.norm() * b.norm());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

inline Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

inline Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

}  // namespace cobra
