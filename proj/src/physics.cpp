#include "skyway/physics.hpp"

#include "skyway/kernels.hpp"
#include "skyway/log.hpp"

#include <cmath>
#include <string>

namespace skyway::physics {

namespace {

void require_positive(double value, const char* field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string("physics.") + field + " must be > 0");
    }
}

}  // namespace

void UavParams::validate() const {
    require_positive(mass_kg, "mass_kg");
    for (int i = 0; i < 3; ++i) {
        require_positive(inertia_diag[i], "inertia_diag");
        require_positive(drag_diag[i], "drag_diag");
    }
    require_positive(arm_length_m, "arm_length_m");
    require_positive(thrust_coeff, "thrust_coeff");
    require_positive(torque_coeff, "torque_coeff");
    require_positive(ground_effect_coeff, "ground_effect_coeff");
    require_positive(prop_radius_m, "prop_radius_m");
    require_positive(rpm_max, "rpm_max");
    require_positive(gravity_mps2, "gravity_mps2");
    require_positive(min_altitude_m, "min_altitude_m");
    if (!(rpm_min >= 0.0 && rpm_min < rpm_max)) {
        throw std::invalid_argument("physics.rpm_min must satisfy 0 <= rpm_min < rpm_max");
    }
}

Vec3 RigidBodyState::euler_rpy() const {
    const Mat3 r = rotation();
    const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    const double roll = std::atan2(r(2, 1), r(2, 2));
    const double yaw = std::atan2(r(1, 0), r(0, 0));
    return {roll, pitch, yaw};
}

bool RigidBodyState::finite() const {
    return position_m.allFinite() && velocity_mps.allFinite() && attitude.coeffs().allFinite() &&
           angular_rate_radps.allFinite() && rotor_rpm.allFinite();
}

bool clamp_rpm(Vec4& rpm, const UavParams& params) {
    bool clipped = false;
    for (int k = 0; k < 4; ++k) {
        const double v = std::isfinite(rpm[k]) ? rpm[k] : params.rpm_min;
        const double c = std::clamp(v, params.rpm_min, params.rpm_max);
        if (c != rpm[k]) clipped = true;
        rpm[k] = c;
    }
    return clipped;
}

RotorOutputs motor_forces(const Vec4& rpm, const UavParams& params) {
    Vec4 clamped = rpm;
    if (clamp_rpm(clamped, params)) {
        log::warn("rotor command outside [", params.rpm_min, ", ", params.rpm_max, "] clamped");
    }
    const Vec4 sq = clamped.array().square();
    return {params.thrust_coeff * sq, params.torque_coeff * sq};
}

Vec3 body_torques(const Vec4& f, const Vec4& m, const UavParams& params) {
    const double lever = params.arm_length_m / std::sqrt(2.0);
    return {lever * (f[0] - f[1] - f[2] + f[3]),
            lever * (f[0] + f[1] - f[2] - f[3]),
            m[0] - m[1] + m[2] - m[3]};
}

Vec4 ground_effect(const Vec4& rpm, const Vec4& altitudes_m, const UavParams& params) {
    Vec4 out;
    for (int k = 0; k < 4; ++k) {
        const double h = std::max(altitudes_m[k], params.min_altitude_m);
        const double ratio = params.prop_radius_m / (4.0 * h);
        out[k] = params.ground_effect_coeff * params.thrust_coeff * ratio * ratio * rpm[k] * rpm[k];
    }
    return out;
}

ForceTorque rotor_wrench(const RigidBodyState& state, const Vec4& rpm, const UavParams& params) {
    const RotorOutputs rotors = motor_forces(rpm, params);
    // Per-rotor altitude approximated by the body altitude.
    const Vec4 altitude = Vec4::Constant(state.position_m.z());
    Vec4 clamped = rpm;
    clamp_rpm(clamped, params);
    const Vec4 thrust = rotors.thrust_N + ground_effect(clamped, altitude, params);
    ForceTorque out;
    out.force_N = state.rotation() * Vec3(0.0, 0.0, thrust.sum());
    out.torque_Nm = body_torques(thrust, rotors.yaw_moment_Nm, params);
    return out;
}

Derivatives derivatives(const RigidBodyState& state, const Vec4& rpm, const UavParams& params) {
    const ForceTorque wrench = rotor_wrench(state, rpm, params);
    const Vec3 gravity(0.0, 0.0, params.mass_kg * params.gravity_mps2);
    const Vec3 drag = params.drag_diag.cwiseProduct(state.velocity_mps);

    Derivatives d;
    d.accel_mps2 = (wrench.force_N - gravity - drag) / params.mass_kg;
    const Vec3& w = state.angular_rate_radps;
    const Vec3 jw = params.inertia_diag.cwiseProduct(w);
    d.angular_accel_radps2 = (wrench.torque_Nm - w.cross(jw)).cwiseQuotient(params.inertia_diag);
    return d;
}

RigidBodyState step(const RigidBodyState& state, const Vec4& rpm_command, const UavParams& params,
                    const IntegratorConfig& integrator) {
    Vec4 command = rpm_command;
    if (clamp_rpm(command, params)) {
        log::warn("rotor command outside [", params.rpm_min, ", ", params.rpm_max, "] clamped");
    }
    const int substeps = std::max(1, integrator.substeps);
    const double h = integrator.dt_s / substeps;

    RigidBodyState s = state;
    for (int i = 0; i < substeps; ++i) {
        if (integrator.motor_time_constant_s > 0.0) {
            const double blend = 1.0 - std::exp(-h / integrator.motor_time_constant_s);
            s.rotor_rpm += blend * (command - s.rotor_rpm);
        } else {
            s.rotor_rpm = command;
        }
        const Derivatives d = derivatives(s, s.rotor_rpm, params);
        s.velocity_mps += h * d.accel_mps2;
        s.angular_rate_radps += h * d.angular_accel_radps2;
        s.position_m += h * s.velocity_mps;

        const Vec3 rotation_vector = h * s.angular_rate_radps;
        const double angle = rotation_vector.norm();
        if (angle > 0.0) {
            s.attitude = s.attitude * Eigen::Quaterniond(Eigen::AngleAxisd(angle, rotation_vector / angle));
        }
        s.attitude.normalize();
    }
    if (!s.finite()) {
        throw SimulationFault("non-finite rigid-body state after integration");
    }
    return s;
}

double hover_rpm(const UavParams& params, double altitude_m) {
    double augmentation = 1.0;
    if (std::isfinite(altitude_m)) {
        const double h = std::max(altitude_m, params.min_altitude_m);
        const double ratio = params.prop_radius_m / (4.0 * h);
        augmentation += params.ground_effect_coeff * ratio * ratio;
    }
    return std::sqrt(params.mass_kg * params.gravity_mps2 / (4.0 * params.thrust_coeff * augmentation));
}

Separation min_separation(std::span<const RigidBodyState> states) {
    std::vector<Vec3> positions;
    positions.reserve(states.size());
    for (const auto& s : states) positions.push_back(s.position_m);
    return kernels::min_separation_parallel(positions);
}

double orthonormality_error(const RigidBodyState& state) {
    const Mat3 r = state.rotation();
    return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace skyway::physics
