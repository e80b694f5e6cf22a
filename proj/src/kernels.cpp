#include "skyway/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <limits>
#include <tuple>

namespace skyway::kernels {

namespace {

// Lexicographic (distance, i, j) ordering makes the reduction order-independent.
bool better(double d, int i, int j, const physics::Separation& cur) {
    return std::tie(d, i, j) < std::tie(cur.distance_m, cur.pair.first, cur.pair.second);
}

}  // namespace

physics::Separation min_separation_serial(std::span<const Vec3> positions) {
    physics::Separation best;
    const int n = static_cast<int>(positions.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = (positions[i] - positions[j]).norm();
            if (better(d, i, j, best)) best = {d, {i, j}};
        }
    }
    return best;
}

physics::Separation min_separation_parallel(std::span<const Vec3> positions) {
    physics::Separation best;
    const int n = static_cast<int>(positions.size());
    if (n < 2) return best;
#pragma omp parallel
    {
        physics::Separation local;
#pragma omp for schedule(dynamic, 16) nowait
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double d = (positions[i] - positions[j]).norm();
                if (better(d, i, j, local)) local = {d, {i, j}};
            }
        }
#pragma omp critical
        {
            if (local.pair.first >= 0 && better(local.distance_m, local.pair.first, local.pair.second, best)) {
                best = local;
            }
        }
    }
    return best;
}

LinkTable tbs_links_serial(std::span<const Vec3> positions, std::span<const channel::TbsConfig> tbs,
                           const channel::NoiseModel& noise, const channel::PathLossModel& model) {
    LinkTable table(positions.size());
    for (std::size_t m = 0; m < positions.size(); ++m) {
        table[m].reserve(tbs.size());
        for (std::size_t b = 0; b < tbs.size(); ++b) {
            table[m].push_back(channel::g2a_link(positions[m], b, tbs, noise, model));
        }
    }
    return table;
}

LinkTable tbs_links_parallel(std::span<const Vec3> positions, std::span<const channel::TbsConfig> tbs,
                             const channel::NoiseModel& noise, const channel::PathLossModel& model) {
    const int count = static_cast<int>(positions.size());
    LinkTable table(positions.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (int m = 0; m < count; ++m) {
        try {
            auto& row = table[m];
            row.reserve(tbs.size());
            for (std::size_t b = 0; b < tbs.size(); ++b) {
                row.push_back(channel::g2a_link(positions[m], b, tbs, noise, model));
            }
        } catch (...) {
#pragma omp critical
            failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return table;
}

std::vector<physics::RigidBodyState> physics_step_serial(std::span<const physics::RigidBodyState> states,
                                                         std::span<const Vec4> commands,
                                                         const physics::UavParams& params,
                                                         const physics::IntegratorConfig& integrator) {
    std::vector<physics::RigidBodyState> out;
    out.reserve(states.size());
    for (std::size_t m = 0; m < states.size(); ++m) {
        out.push_back(physics::step(states[m], commands[m], params, integrator));
    }
    return out;
}

std::vector<physics::RigidBodyState> physics_step_parallel(std::span<const physics::RigidBodyState> states,
                                                           std::span<const Vec4> commands,
                                                           const physics::UavParams& params,
                                                           const physics::IntegratorConfig& integrator) {
    const int count = static_cast<int>(states.size());
    std::vector<physics::RigidBodyState> out(states.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (int m = 0; m < count; ++m) {
        try {
            out[m] = physics::step(states[m], commands[m], params, integrator);
        } catch (...) {
#pragma omp critical
            failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

std::vector<double> euclidean_distances_serial(std::span<const double> query, std::span<const double> rows,
                                               std::size_t dim) {
    const std::size_t count = dim == 0 ? 0 : rows.size() / dim;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double diff = query[k] - rows[i * dim + k];
            acc += diff * diff;
        }
        out[i] = std::sqrt(acc);
    }
    return out;
}

std::vector<double> euclidean_distances_parallel(std::span<const double> query, std::span<const double> rows,
                                                 std::size_t dim) {
    const long count = dim == 0 ? 0 : static_cast<long>(rows.size() / dim);
    std::vector<double> out(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static) if (count > 2048)
    for (long i = 0; i < count; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double diff = query[k] - rows[static_cast<std::size_t>(i) * dim + k];
            acc += diff * diff;
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(acc);
    }
    return out;
}

}  // namespace skyway::kernels
