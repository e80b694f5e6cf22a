#include "skyway/physics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace skyway;
using namespace skyway::physics;

TEST_SUITE("physics") {

TEST_CASE("motor forces are quadratic in rpm") {
    UavParams p;
    const auto zero = motor_forces(Vec4::Zero(), p);
    CHECK(zero.thrust_N.norm() == 0.0);

    const double ph = std::sqrt(p.mass_kg * p.gravity_mps2 / (4.0 * p.thrust_coeff));
    const auto hover = motor_forces(Vec4::Constant(ph), p);
    CHECK(hover.thrust_N.sum() == doctest::Approx(14.715).epsilon(1e-12));

    const auto one = motor_forces(Vec4(1000, 0, 0, 0), p);
    const auto two = motor_forces(Vec4(2000, 0, 0, 0), p);
    CHECK(two.thrust_N[0] == doctest::Approx(4.0 * one.thrust_N[0]));
    CHECK(one.yaw_moment_Nm[0] == doctest::Approx(p.torque_coeff * 1e6));
}

TEST_CASE("rpm clamping reports saturation") {
    UavParams p;
    Vec4 rpm(-5.0, 100.0, 30000.0, 1.0);
    CHECK(clamp_rpm(rpm, p));
    CHECK(rpm[0] == p.rpm_min);
    CHECK(rpm[2] == p.rpm_max);
    Vec4 fine = Vec4::Constant(100.0);
    CHECK_FALSE(clamp_rpm(fine, p));
}

TEST_CASE("x-configuration torques") {
    UavParams p;
    p.arm_length_m = std::sqrt(2.0);
    const Vec3 t = body_torques(Vec4(1, 0, 0, 0), Vec4::Zero(), p);
    CHECK(t.x() == doctest::Approx(1.0));
    CHECK(t.y() == doctest::Approx(1.0));
    CHECK(t.z() == 0.0);
    CHECK(body_torques(Vec4::Constant(2.0), Vec4::Constant(0.3), p).norm() == doctest::Approx(0.0));
    const Vec3 yaw = body_torques(Vec4::Zero(), Vec4(1, 0, 0, 0), p);
    CHECK(yaw.z() == doctest::Approx(1.0));
}

TEST_CASE("ground effect") {
    UavParams p;
    const Vec4 rpm = Vec4::Constant(12000.0);
    const Vec4 f = motor_forces(rpm, p).thrust_N;
    const Vec4 near = ground_effect(rpm, Vec4::Constant(p.prop_radius_m / 4.0), p);
    CHECK(near[0] == doctest::Approx(p.ground_effect_coeff * f[0]).epsilon(1e-12));
    const Vec4 far = ground_effect(rpm, Vec4::Constant(1000.0 * p.prop_radius_m), p);
    CHECK(far[0] / f[0] < 1e-6);
    CHECK(ground_effect(Vec4::Zero(), Vec4::Constant(1.0), p).norm() == 0.0);
    // Guard keeps h = 0 finite.
    CHECK(std::isfinite(ground_effect(rpm, Vec4::Zero(), p)[0]));
    double prev = 1e300;
    for (double h = 0.05; h < 5.0; h += 0.05) {
        const double g = ground_effect(rpm, Vec4::Constant(h), p)[0];
        CHECK(g < prev);
        prev = g;
    }
}

TEST_CASE("derivative fixtures") {
    UavParams p;
    RigidBodyState s;
    s.position_m = {0, 0, 1e6};
    const double ph = hover_rpm(p);
    auto d = derivatives(s, Vec4::Constant(ph), p);
    CHECK(d.accel_mps2.norm() < 1e-9);
    CHECK(d.angular_accel_radps2.norm() < 1e-9);

    d = derivatives(s, Vec4::Zero(), p);
    CHECK(d.accel_mps2.z() == doctest::Approx(-p.gravity_mps2));

    s.velocity_mps = {3.0, 0, 0};
    d = derivatives(s, Vec4::Constant(ph), p);
    CHECK(d.accel_mps2.x() == doctest::Approx(-p.drag_diag.x() * 3.0 / p.mass_kg));
    CHECK(std::abs(d.accel_mps2.z()) < 1e-9);
}

TEST_CASE("hover is a fixed point of the integrator") {
    UavParams p;
    RigidBodyState s;
    s.position_m = {10, 20, 150};
    const Vec4 cmd = Vec4::Constant(hover_rpm(p, 150.0));
    s.rotor_rpm = cmd;
    for (int i = 0; i < 20; ++i) {
        const auto n = step(s, cmd, p);
        CHECK((n.position_m - s.position_m).norm() < 1e-9);
        CHECK(n.velocity_mps.norm() < 1e-9);
        s = n;
    }
}

TEST_CASE("free fall over one second") {
    UavParams p;
    p.drag_diag = Vec3::Zero();
    RigidBodyState s;
    s.position_m = {0, 0, 200};
    for (int i = 0; i < 20; ++i) s = step(s, Vec4::Zero(), p);
    const double drop = 200.0 - s.position_m.z();
    CHECK(std::abs(drop - 4.905) / 4.905 < 0.02);
}

TEST_CASE("pure yaw torque spins up linearly") {
    UavParams p;
    RigidBodyState s;
    s.position_m = {0, 0, 1e6};
    const double ph = hover_rpm(p);
    // Keep total thrust while unbalancing the yaw moments.
    const double hi = std::sqrt(1.2) * ph, lo = std::sqrt(0.8) * ph;
    const Vec4 cmd(hi, lo, hi, lo);
    const double tau_z = 2.0 * p.torque_coeff * (hi * hi - lo * lo);
    const double alpha = tau_z / p.inertia_diag.z();
    for (int k = 1; k <= 10; ++k) {
        s = step(s, cmd, p);
        CHECK(s.angular_rate_radps.z() == doctest::Approx(alpha * 0.05 * k).epsilon(1e-9));
        CHECK(std::abs(s.angular_rate_radps.x()) < 1e-12);
        CHECK(std::abs(s.angular_rate_radps.y()) < 1e-12);
        CHECK(orthonormality_error(s) < 1e-6);
    }
}

TEST_CASE("energy conserved without thrust or drag") {
    UavParams p;
    p.drag_diag = Vec3::Zero();
    RigidBodyState s;
    s.position_m = {0, 0, 1000};
    s.velocity_mps = {4, -2, 10};
    auto energy = [&](const RigidBodyState& x) {
        return 0.5 * p.mass_kg * x.velocity_mps.squaredNorm() + p.mass_kg * p.gravity_mps2 * x.position_m.z();
    };
    const double e0 = energy(s);
    for (int i = 0; i < 100; ++i) s = step(s, Vec4::Zero(), p);
    CHECK(std::abs(energy(s) - e0) / e0 < 0.005);
}

TEST_CASE("attitude stays orthonormal under random commands") {
    UavParams p;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.4, 0.6);
    RigidBodyState s;
    s.position_m = {0, 0, 5000};
    for (int i = 0; i < 200; ++i) {
        const Vec4 cmd(u(rng) * p.rpm_max, u(rng) * p.rpm_max, u(rng) * p.rpm_max, u(rng) * p.rpm_max);
        s = step(s, cmd, p);
        REQUIRE(orthonormality_error(s) < 1e-6);
    }
}

TEST_CASE("thrust monotone in uniform rpm") {
    UavParams p;
    RigidBodyState s;
    s.position_m = {0, 0, 50};
    double prev = -1e300;
    for (double r = 0.0; r <= p.rpm_max; r += 500.0) {
        const double fz = rotor_wrench(s, Vec4::Constant(r), p).force_N.z();
        CHECK(fz > prev);
        prev = fz;
    }
}

TEST_CASE("non-finite state raises a simulation fault") {
    UavParams p;
    RigidBodyState s;
    s.velocity_mps.x() = std::nan("");
    CHECK_THROWS_AS(step(s, Vec4::Zero(), p), SimulationFault);
}

TEST_CASE("minimum separation") {
    std::vector<RigidBodyState> s(2);
    s[0].position_m = {0, 0, 100};
    s[1].position_m = {3, 4, 100};
    auto r = min_separation(s);
    CHECK(r.distance_m == doctest::Approx(5.0));
    CHECK(r.pair == std::pair{0, 1});
    s[1].position_m = s[0].position_m;
    CHECK(min_separation(s).distance_m == 0.0);
    s.resize(1);
    CHECK(std::isinf(min_separation(s).distance_m));

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 100);
    s.resize(3);
    for (auto& x : s) x.position_m = {u(rng), u(rng), u(rng)};
    double best = 1e300;
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) best = std::min(best, (s[i].position_m - s[j].position_m).norm());
    }
    CHECK(min_separation(s).distance_m == doctest::Approx(best));
}

TEST_CASE("params validation") {
    UavParams p;
    p.rpm_min = p.rpm_max;
    CHECK_THROWS(p.validate());
    UavParams q;
    q.inertia_diag.x() = 0.0;
    CHECK_THROWS(q.validate());
}

}
