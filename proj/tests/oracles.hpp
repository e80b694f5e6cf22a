#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numeric code.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace oracle {

struct Site {
    double x, y, z;
    double p_dbm;
    int n;
    double tilt_rad;
    double bw_hz;
    double fc_hz;
    double gmax_db;
    double am_db;
    double sla_db;
    double hpbw_rad;
    int sectors;
};

struct Plm {
    double los_a, los_b;
    double nlos_a, nlos_b0, nlos_bh;
    bool band;
    double band_lo, band_hi;
};

// Downlink SINR at (ux,uy,uz) from sites[serving], every other site interfering.
double g2a_sinr(double ux, double uy, double uz, int serving, const std::vector<Site>& sites, const Plm& plm,
                double n0_dbm_hz);

// Boresight element gain in dB.
double element_gain_db(double az_rad, double el_rad, const Site& s);

// Second moment of the Rician coefficient with the 1/sqrt(2) prefactor.
double rician_power(double k_db);

double weighted_rate(double r, int q, int n, bool ho, double gamma);

// Optimal Q for a deterministic MDP by value iteration.
// next[s][a], reward[s][a], terminal[s][a] (terminal transitions do not bootstrap).
std::vector<std::vector<double>> value_iteration(const std::vector<std::vector<int>>& next,
                                                 const std::vector<std::vector<double>>& reward,
                                                 const std::vector<std::vector<bool>>& terminal, double gamma);

// Indices of the k nearest rows (full sort, distance then larger sequence first).
std::vector<std::size_t> nearest_by_sort(const std::vector<std::vector<double>>& rows,
                                         const std::vector<std::uint64_t>& sequence, const std::vector<double>& q,
                                         int k);

// Equal-split HAPS aggregate rate for the given full-band SNRs.
double equal_split_load(const std::vector<double>& snr, double bandwidth_hz);

}  // namespace oracle
