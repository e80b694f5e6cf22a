#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace skyway {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

// Raised when the integrator produces non-finite state; the episode aborts.
class SimulationFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace skyway

namespace skyway::physics {

inline constexpr double kGravity = 9.81;

struct UavParams {
    double mass_kg = 1.5;
    Vec3 inertia_diag{0.029, 0.029, 0.055};
    double arm_length_m = 0.35;
    // Hover at 50% of rpm_max: k_F = M g / (4 (0.5 P_max)^2).
    double thrust_coeff = 1.5 * kGravity / (4.0 * 12500.0 * 12500.0);
    double torque_coeff = 0.01 * 1.5 * kGravity / (4.0 * 12500.0 * 12500.0);
    Vec3 drag_diag{0.1, 0.1, 0.1};
    double ground_effect_coeff = 2.0;
    double prop_radius_m = 0.12;
    double rpm_min = 0.0;
    double rpm_max = 25000.0;
    double gravity_mps2 = kGravity;
    // Singularity guard for the ground-effect term.
    double min_altitude_m = 0.01;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct RigidBodyState {
    Vec3 position_m = Vec3::Zero();
    Vec3 velocity_mps = Vec3::Zero();
    // Body to inertial.
    Eigen::Quaterniond attitude = Eigen::Quaterniond::Identity();
    Vec3 angular_rate_radps = Vec3::Zero();
    Vec4 rotor_rpm = Vec4::Zero();

    Mat3 rotation() const { return attitude.toRotationMatrix(); }
    // ZYX convention: (roll, pitch, yaw).
    Vec3 euler_rpy() const;
    bool finite() const;
};

struct ForceTorque {
    Vec3 force_N = Vec3::Zero();   // inertial frame
    Vec3 torque_Nm = Vec3::Zero(); // body frame
};

struct RotorOutputs {
    Vec4 thrust_N = Vec4::Zero();
    Vec4 yaw_moment_Nm = Vec4::Zero();
};

struct Derivatives {
    Vec3 accel_mps2 = Vec3::Zero();
    Vec3 angular_accel_radps2 = Vec3::Zero();
};

struct IntegratorConfig {
    double dt_s = 0.05;
    // Semi-implicit Euler substeps per control step.
    int substeps = 10;
    // First-order motor lag time constant; 0 means instantaneous tracking.
    double motor_time_constant_s = 0.0;
};

// Clamp each entry into [rpm_min, rpm_max]. Returns true if anything was clipped.
bool clamp_rpm(Vec4& rpm, const UavParams& params);

RotorOutputs motor_forces(const Vec4& rpm, const UavParams& params);

Vec3 body_torques(const Vec4& thrust_N, const Vec4& yaw_moment_Nm, const UavParams& params);

// Per-rotor thrust augmentation near the ground. Altitudes below the guard are clamped.
Vec4 ground_effect(const Vec4& rpm, const Vec4& altitudes_m, const UavParams& params);

// Total body-frame thrust (with ground effect) and body torques for a rotor command.
ForceTorque rotor_wrench(const RigidBodyState& state, const Vec4& rpm, const UavParams& params);

Derivatives derivatives(const RigidBodyState& state, const Vec4& rpm, const UavParams& params);

// Advance one control step. Throws SimulationFault on non-finite results.
RigidBodyState step(const RigidBodyState& state, const Vec4& rpm_command, const UavParams& params,
                    const IntegratorConfig& integrator = {});

// Uniform RPM giving total thrust M g at the given altitude (ground effect included).
double hover_rpm(const UavParams& params, double altitude_m = std::numeric_limits<double>::infinity());

struct Separation {
    double distance_m = std::numeric_limits<double>::infinity();
    std::pair<int, int> pair{-1, -1};
};

// Minimum pairwise distance; +inf with pair (-1,-1) for fewer than two bodies.
Separation min_separation(std::span<const RigidBodyState> states);

// ||R^T R - I||_inf for the attitude's rotation matrix.
double orthonormality_error(const RigidBodyState& state);

}  // namespace skyway::physics
