#pragma once

// Data-parallel kernels used on the simulation hot path. Each OpenMP kernel
// has a serial reference with identical arithmetic order, so results are
// bit-identical regardless of thread count; tests compare the two.

#include "skyway/channel.hpp"
#include "skyway/physics.hpp"

#include <span>
#include <vector>

namespace skyway::kernels {

physics::Separation min_separation_serial(std::span<const Vec3> positions);
physics::Separation min_separation_parallel(std::span<const Vec3> positions);

// Row m holds the link from UAV m to every TBS (index = TBS id).
using LinkTable = std::vector<std::vector<channel::LinkSample>>;

LinkTable tbs_links_serial(std::span<const Vec3> positions, std::span<const channel::TbsConfig> tbs,
                           const channel::NoiseModel& noise, const channel::PathLossModel& model);
LinkTable tbs_links_parallel(std::span<const Vec3> positions, std::span<const channel::TbsConfig> tbs,
                             const channel::NoiseModel& noise, const channel::PathLossModel& model);

std::vector<physics::RigidBodyState> physics_step_serial(std::span<const physics::RigidBodyState> states,
                                                         std::span<const Vec4> commands,
                                                         const physics::UavParams& params,
                                                         const physics::IntegratorConfig& integrator);
std::vector<physics::RigidBodyState> physics_step_parallel(std::span<const physics::RigidBodyState> states,
                                                           std::span<const Vec4> commands,
                                                           const physics::UavParams& params,
                                                           const physics::IntegratorConfig& integrator);

// Distances from a query to `count` row-major embeddings of width `dim`.
std::vector<double> euclidean_distances_serial(std::span<const double> query, std::span<const double> rows,
                                               std::size_t dim);
std::vector<double> euclidean_distances_parallel(std::span<const double> query, std::span<const double> rows,
                                                 std::size_t dim);

}  // namespace skyway::kernels
