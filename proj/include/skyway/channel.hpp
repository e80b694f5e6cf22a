#pragma once

#include "skyway/physics.hpp"

#include <complex>
#include <random>
#include <span>
#include <vector>

namespace skyway::channel {

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

// Three-sector terrestrial base station with a vertical ULA.
struct TbsConfig {
    Vec3 position_m{0.0, 0.0, 25.0};
    double tx_power_dbm = 40.0;
    int num_antennas = 8;
    double downtilt_rad = 0.1745329251994330;
    double bandwidth_hz = 20e6;
    double carrier_hz = 2.1e9;
    double peak_element_gain_dbi = 8.0;
    double sidelobe_limit_db = 30.0;  // B_m
    double sla_db = 30.0;
    double half_power_beamwidth_rad = 65.0 * kPi / 180.0;
    int sectors = 3;
    int quota = 5;

    void validate() const;
};

struct HapsConfig {
    Vec3 position_m{500.0, 500.0, 20000.0};
    double total_bandwidth_hz = 20e6;
    double antenna_gain_linear = 7.4;
    double carrier_hz = 2.0e9;
    double rician_k_db = 15.0;
    double max_uav_tx_power_dbm = 23.0;
    double capacity_limit_bps = 100e6;
    int quota = 5;

    void validate() const;
};

struct NoiseModel {
    double noise_psd_dbm_per_hz = -174.0;
};

// L = intercept + slope log10(d) + 20 log10(f_GHz) for LoS; the NLoS slope
// decreases with altitude as (base - altitude_slope log10 h).
struct PathLossModel {
    double los_intercept_db = 28.0;
    double los_distance_slope = 22.0;
    double nlos_intercept_db = -17.5;
    double nlos_distance_slope_base = 46.0;
    double nlos_distance_slope_altitude = 7.0;
    bool assume_los_band = true;
    double los_band_min_altitude_m = 100.0;
    double los_band_max_altitude_m = 300.0;
};

struct LinkSample {
    int node = -1;
    double distance_m = 0.0;
    double azimuth_rad = 0.0;
    double elevation_rad = 0.0;
    double gain_linear = 0.0;
    double sinr_linear = 0.0;
    double rate_bps = 0.0;
    double weighted_rate_bps = 0.0;
    double los_prob = 1.0;
};

// Geometry of a UAV relative to one TBS. Azimuth is measured from the
// boresight of the closest sector, elevation from the horizontal.
struct TbsGeometry {
    double distance_m;
    double azimuth_rad;
    double elevation_rad;
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

TbsGeometry tbs_geometry(const Vec3& uav_pos, const TbsConfig& tbs);

double element_gain_db(double azimuth_rad, double elevation_rad, const TbsConfig& cfg);

double array_factor_amplitude(double elevation_rad, const TbsConfig& cfg);

// Element gain plus 20 log10 |F| (floored at 1e-6).
double pattern_gain_db(double azimuth_rad, double elevation_rad, const TbsConfig& cfg);

// Throws std::domain_error for non-positive altitude or distance.
double los_probability(double distance_m, double uav_altitude_m, const PathLossModel& model = {});

double los_path_loss_db(double distance_m, double carrier_hz, const PathLossModel& model);
double nlos_path_loss_db(double distance_m, double uav_altitude_m, double carrier_hz, const PathLossModel& model);

double mean_path_loss_db(double distance_m, double uav_altitude_m, const TbsConfig& cfg,
                         const PathLossModel& model = {});

// Linear channel power gain G = 10^((G_max - L)/10).
double tbs_channel_gain(const Vec3& uav_pos, const TbsConfig& cfg, const PathLossModel& model = {});

// Downlink SINR at the UAV from all_tbs[serving]; the others interfere.
double g2a_sinr(const Vec3& uav_pos, std::size_t serving, std::span<const TbsConfig> all_tbs,
                const NoiseModel& noise = {}, const PathLossModel& model = {});

// Full link evaluation for one (UAV, TBS) pair.
LinkSample g2a_link(const Vec3& uav_pos, std::size_t serving, std::span<const TbsConfig> all_tbs,
                    const NoiseModel& noise = {}, const PathLossModel& model = {});

template <typename Rng>
std::complex<double> rician_sample(double k_db, Rng& rng, bool normalize = false);

double haps_channel_gain(double distance_m, std::complex<double> fading, const HapsConfig& cfg);

// b, p in [0,1]; zero bandwidth yields zero rate.
double haps_rate(double bandwidth_frac, double power_frac, double gain_linear, const HapsConfig& cfg,
                 const NoiseModel& noise = {});

// SNR the UAV would see with the whole HAPS band and full power.
double haps_full_band_snr(double gain_linear, const HapsConfig& cfg, const NoiseModel& noise = {});

double weighted_rate(double rate_bps, int quota, int load, bool handover, double gamma);

template <typename Rng>
std::complex<double> rician_sample(double k_db, Rng& rng, bool normalize) {
    const double k = db_to_linear(k_db);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double theta = phase(rng);
    const double gi = gauss(rng);
    const double gq = gauss(rng);
    const std::complex<double> los = std::sqrt(k / (k + 1.0)) * std::polar(1.0, theta);
    const std::complex<double> scatter = std::sqrt(1.0 / (k + 1.0)) * std::complex<double>(gi, gq);
    std::complex<double> h = (los + scatter) / std::sqrt(2.0);
    if (normalize) {
        // Rescale so that E|h|^2 = 1.
        h *= std::sqrt(2.0 * (k + 1.0) / (k + 2.0));
    }
    return h;
}

}  // namespace skyway::channel
