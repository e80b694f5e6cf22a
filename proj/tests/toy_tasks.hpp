#pragma once

#include "skyway/cognition.hpp"

#include <cstdint>

namespace toy {

struct ChannelTask {
    double first_mean = 0.0;  // mean reward over the first 1k steps
    double last_mean = 0.0;   // mean reward over the last 1k steps
};

// Three nodes (two TBS and the HAPS) with one strictly dominant SINR.
// The agent picks among Stay / HO-to-TBS / RequestHAPS; reward is the
// serving rate minus a unit handover cost.
ChannelTask channel_selection(std::uint64_t seed, int steps = 20000);

// Largest |Q - Q*| on a deterministic two-state, two-action MDP.
double two_state_mdp_error(std::uint64_t seed, int steps = 20000);

// Max relative error between the analytic loss gradient and central differences.
double gradient_check_error(std::uint64_t seed);

}  // namespace toy

namespace toy {

struct Flight {
    double max_tilt_deg = 0.0;  // max of |roll|, |pitch| over the run
    double final_ground_speed_mps = 0.0;
    double final_vertical_speed_mps = 0.0;
    bool finite = true;
    bool rpm_in_bounds = true;
};

// Holds one directive from hover at 150 m for the given duration with noise-free state feedback.
Flight hold_directive(const skyway::cognition::SemanticDirective& d, double seconds,
                      const skyway::ScenarioConfig& cfg = {});

}  // namespace toy
