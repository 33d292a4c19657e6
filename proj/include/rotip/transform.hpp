#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "rotip/errors.hpp"

namespace rotip {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

// Unit-norm direction. Construction normalizes and rejects near-zero input,
// so downstream geometry can assume |v| == 1.
class UnitVector3 {
 public:
  explicit UnitVector3(const Vec3& v) {
    double n = v.norm();
    if (n < 1e-12)
      throw PreconditionViolation("UnitVector3: vector norm below 1e-12");
    v_ = v / n;
  }

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }

 private:
  Vec3 v_;
};

// Oriented plane n . p = d.
struct Plane3 {
  UnitVector3 n;
  double d = 0.0;

  double signed_distance(const Vec3& p) const { return n.vec().dot(p) - d; }
};

// Angle between two directions in degrees, insensitive to which is first.
inline double angle_error_deg(const UnitVector3& a, const UnitVector3& b) {
  double c = a.vec().dot(b.vec());
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * 180.0 / M_PI;
}

// Rotation with the smallest angle taking direction n1 to n2 (Rodrigues
// form R = I + sin(t) A + (1 - cos(t)) A^2 with A = skew of the unit axis).
// Antiparallel inputs have no unique axis; we pick, deterministically, the
// coordinate axis most orthogonal to n1 and project it onto n1's plane.
inline Mat3 rodrigues_align(const UnitVector3& n1, const UnitVector3& n2) {
  const Vec3& a = n1.vec();
  const Vec3& b = n2.vec();
  double c = std::clamp(a.dot(b), -1.0, 1.0);
  Vec3 axis = a.cross(b);
  double s = axis.norm();
  if (s < 1e-12) {
    if (c > 0.0) return Mat3::Identity();
    // 180 degree turn about any axis orthogonal to a
    int k = 0;
    if (std::abs(a.y()) < std::abs(a[k])) k = 1;
    if (std::abs(a.z()) < std::abs(a[k])) k = 2;
    Vec3 e = Vec3::Zero();
    e[k] = 1.0;
    Vec3 u = (e - a * a.dot(e)).normalized();
    return 2.0 * u * u.transpose() - Mat3::Identity();
  }
  Mat3 A = skew(axis / s);
  double theta = std::atan2(s, c);
  return Mat3::Identity() + std::sin(theta) * A +
         (1.0 - std::cos(theta)) * A * A;
}

// Rigid transform in SE(3). The constructor validates orthonormality and
// det(R) = +1 to 1e-9 so invalid rotations fail loudly at the source.
class RigidTransform {
 public:
  RigidTransform() : r_(Mat3::Identity()), t_(Vec3::Zero()) {}

  RigidTransform(const Mat3& r, const Vec3& t) : r_(r), t_(t) {
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(r.determinant() - 1.0) > 1e-9)
      throw PreconditionViolation("RigidTransform: R is not a rotation");
  }

  static RigidTransform identity() { return RigidTransform(); }

  const Mat3& rotation() const { return r_; }
  const Vec3& translation() const { return t_; }

  Vec3 apply(const Vec3& p) const { return r_ * p + t_; }
  Vec3 rotate(const Vec3& v) const { return r_ * v; }

  RigidTransform inverse() const {
    RigidTransform out;
    out.r_ = r_.transpose();
    out.t_ = -(out.r_ * t_);
    return out;
  }

  RigidTransform operator*(const RigidTransform& o) const {
    RigidTransform out;
    out.r_ = r_ * o.r_;
    out.t_ = r_ * o.t_ + t_;
    // renormalize drift from long compose chains
    if ((out.r_.transpose() * out.r_ - Mat3::Identity()).cwiseAbs().maxCoeff() >
        1e-12) {
      Eigen::JacobiSVD<Mat3> svd(out.r_,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
      out.r_ = svd.matrixU() * svd.matrixV().transpose();
    }
    return out;
  }

 private:
  Mat3 r_;
  Vec3 t_;
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return a * b;
}

inline RigidTransform rot_x(double a) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return RigidTransform(r, Vec3::Zero());
}

inline RigidTransform rot_y(double a) {
  Mat3 r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return RigidTransform(r, Vec3::Zero());
}

inline RigidTransform rot_z(double a) {
  Mat3 r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return RigidTransform(r, Vec3::Zero());
}

inline RigidTransform translate(const Vec3& t) {
  return RigidTransform(Mat3::Identity(), t);
}

namespace detail {

// log of a rotation matrix as axis * angle. The angle-pi branch recovers the
// axis from the dominant diagonal of (R + I) / 2; there the sign of the axis
// is inherently ambiguous and we fix it by making the dominant component
// positive, which keeps the result deterministic.
inline Vec3 so3_log(const Mat3& r) {
  double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  double theta = std::acos(c);
  if (theta < 1e-10) return 0.5 * vee(r - r.transpose());
  if (theta > M_PI - 1e-6) {
    Mat3 a = 0.5 * (r + Mat3::Identity());
    int k = 0;
    if (a(1, 1) > a(k, k)) k = 1;
    if (a(2, 2) > a(k, k)) k = 2;
    Vec3 axis = a.col(k);
    axis /= std::sqrt(a(k, k));
    if (axis[k] < 0.0) axis = -axis;
    return theta * axis.normalized();
  }
  return theta / (2.0 * std::sin(theta)) * vee(r - r.transpose());
}

inline Mat3 so3_exp(const Vec3& w) {
  double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity() + skew(w);
  Mat3 a = skew(w / theta);
  return Mat3::Identity() + std::sin(theta) * a +
         (1.0 - std::cos(theta)) * a * a;
}

}  // namespace detail

// Body-frame pose error twist: the first three components are translational
// (mm) and the last three rotational (rad). Applying se3_exp of the twist on
// the right of `current` reaches `target` exactly.
struct PoseError {
  Vec6 twist = Vec6::Zero();

  Vec3 translational() const { return twist.head<3>(); }
  Vec3 rotational() const { return twist.tail<3>(); }
};

inline RigidTransform se3_exp(const Vec6& twist) {
  Vec3 rho = twist.head<3>();
  Vec3 w = twist.tail<3>();
  double theta = w.norm();
  Mat3 r = detail::so3_exp(w);
  Mat3 v;
  if (theta < 1e-6) {
    v = Mat3::Identity() + 0.5 * skew(w) + skew(w) * skew(w) / 6.0;
  } else {
    Mat3 a = skew(w);
    v = Mat3::Identity() + (1.0 - std::cos(theta)) / (theta * theta) * a +
        (theta - std::sin(theta)) / (theta * theta * theta) * a * a;
  }
  return RigidTransform(r, v * rho);
}

inline PoseError pose_error(const RigidTransform& current,
                            const RigidTransform& target) {
  RigidTransform rel = current.inverse() * target;
  Vec3 w = detail::so3_log(rel.rotation());
  double theta = w.norm();
  Mat3 v_inv;
  if (theta < 1e-6) {
    Mat3 a = skew(w);
    v_inv = Mat3::Identity() - 0.5 * a + a * a / 12.0;
  } else {
    Mat3 a = skew(w);
    double s = std::sin(theta) / theta;
    double c = (1.0 - std::cos(theta)) / (theta * theta);
    v_inv = Mat3::Identity() - 0.5 * a +
            (1.0 - s / (2.0 * c)) / (theta * theta) * a * a;
  }
  PoseError e;
  e.twist.head<3>() = v_inv * rel.translation();
  e.twist.tail<3>() = w;
  return e;
}

}  // namespace rotip
