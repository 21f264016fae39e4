#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace skewsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    Io,
    MalformedHeader,
    UnsupportedFormat,
    MissingField,
    TruncatedPayload,
    Parse,
    ContractViolation,
    Divergence,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every fallible operation in the library.
/// `field()` names the offending field or entry when there is one.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string field = {})
        : std::runtime_error(message), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

}  // namespace skewsplat
