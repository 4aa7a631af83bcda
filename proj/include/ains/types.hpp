#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace ains {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec15 = Eigen::Matrix<double, 15, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat96 = Eigen::Matrix<double, 9, 6>;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat35 = Eigen::Matrix<double, 3, 5>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

enum class ErrorCode {
  AngleNearPi,
  SingularInput,
  NonPSD,
  DegenerateMeasurement,
  SingularInnovationCov,
  LostPositivity,
  InvalidArgument,
};

const char* to_string(ErrorCode code);

// Every numerical failure surfaces as this exception; the CLI maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ains
