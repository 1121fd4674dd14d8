#pragma once

#include <Eigen/Dense>
#include <complex>

namespace bohmflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;
using Complex = std::complex<double>;

}  // namespace bohmflow
