#include "skyway/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace skyway::channel {

namespace {

double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

}  // namespace

void TbsConfig::validate() const {
    if (!(tx_power_dbm > -300.0 && std::isfinite(tx_power_dbm))) throw std::invalid_argument("tbs.tx_power_dbm invalid");
    if (!(bandwidth_hz > 0.0)) throw std::invalid_argument("tbs.bandwidth_hz must be > 0");
    if (!(carrier_hz > 0.0)) throw std::invalid_argument("tbs.carrier_hz must be > 0");
    if (num_antennas <= 0) throw std::invalid_argument("tbs.num_antennas must be > 0");
    if (!(half_power_beamwidth_rad > 0.0 && half_power_beamwidth_rad < kPi)) {
        throw std::invalid_argument("tbs.half_power_beamwidth_rad must lie in (0, pi)");
    }
    if (sectors <= 0) throw std::invalid_argument("tbs.sectors must be > 0");
    if (quota < 1) throw std::invalid_argument("tbs.quota must be >= 1");
}

void HapsConfig::validate() const {
    if (!(total_bandwidth_hz > 0.0)) throw std::invalid_argument("haps.total_bandwidth_hz must be > 0");
    if (!(capacity_limit_bps > 0.0)) throw std::invalid_argument("haps.capacity_limit_bps must be > 0");
    if (!(antenna_gain_linear > 0.0)) throw std::invalid_argument("haps.antenna_gain_linear must be > 0");
    if (!(carrier_hz > 0.0)) throw std::invalid_argument("haps.carrier_hz must be > 0");
    if (quota < 1) throw std::invalid_argument("haps.quota must be >= 1");
}

TbsGeometry tbs_geometry(const Vec3& uav_pos, const TbsConfig& tbs) {
    const Vec3 delta = uav_pos - tbs.position_m;
    const double horizontal = std::hypot(delta.x(), delta.y());
    TbsGeometry g{};
    g.distance_m = delta.norm();
    g.elevation_rad = std::atan2(delta.z(), horizontal);
    const double bearing = std::atan2(delta.y(), delta.x());
    const double sector_width = 2.0 * kPi / tbs.sectors;
    double best = kPi;
    for (int s = 0; s < tbs.sectors; ++s) {
        const double rel = wrap_angle(bearing - s * sector_width);
        if (std::abs(rel) < std::abs(best)) best = rel;
    }
    g.azimuth_rad = best;
    return g;
}

double element_gain_db(double azimuth_rad, double elevation_rad, const TbsConfig& cfg) {
    const double az = azimuth_rad / cfg.half_power_beamwidth_rad;
    const double el = elevation_rad / cfg.half_power_beamwidth_rad;
    const double a_az = std::min(12.0 * az * az, cfg.sidelobe_limit_db);
    const double a_el = std::min(12.0 * el * el, cfg.sla_db);
    return cfg.peak_element_gain_dbi - std::min(a_az + a_el, cfg.sidelobe_limit_db);
}

double array_factor_amplitude(double elevation_rad, const TbsConfig& cfg) {
    const double n = cfg.num_antennas;
    const double delta = std::sin(elevation_rad) - std::sin(cfg.downtilt_rad);
    const double den_arg = kPi / 2.0 * delta;
    if (std::abs(den_arg) < 1e-9) return std::sqrt(n);
    return std::sin(n * den_arg) / (std::sqrt(n) * std::sin(den_arg));
}

double pattern_gain_db(double azimuth_rad, double elevation_rad, const TbsConfig& cfg) {
    const double f = std::abs(array_factor_amplitude(elevation_rad, cfg));
    return element_gain_db(azimuth_rad, elevation_rad, cfg) + 20.0 * std::log10(std::max(f, 1e-6));
}

double los_probability(double distance_m, double uav_altitude_m, const PathLossModel& model) {
    if (!(uav_altitude_m > 0.0)) throw std::domain_error("los_probability: altitude must be > 0");
    if (!(distance_m > 0.0)) throw std::domain_error("los_probability: distance must be > 0");
    if (model.assume_los_band && uav_altitude_m >= model.los_band_min_altitude_m &&
        uav_altitude_m <= model.los_band_max_altitude_m) {
        return 1.0;
    }
    const double lh = std::log10(uav_altitude_m);
    const double d1 = std::max(460.0 * lh - 700.0, 18.0);
    if (distance_m <= d1) return 1.0;
    const double p1 = 4300.0 * lh - 3800.0;
    const double ratio = d1 / distance_m;
    const double p = ratio + std::exp(-distance_m / p1) * (1.0 - ratio);
    return std::clamp(p, 0.0, 1.0);
}

double los_path_loss_db(double distance_m, double carrier_hz, const PathLossModel& model) {
    return model.los_intercept_db + model.los_distance_slope * std::log10(distance_m) +
           20.0 * std::log10(carrier_hz / 1e9);
}

double nlos_path_loss_db(double distance_m, double uav_altitude_m, double carrier_hz, const PathLossModel& model) {
    const double slope = model.nlos_distance_slope_base - model.nlos_distance_slope_altitude * std::log10(uav_altitude_m);
    return model.nlos_intercept_db + slope * std::log10(distance_m) +
           20.0 * std::log10(40.0 * kPi * (carrier_hz / 1e9) / 3.0);
}

double mean_path_loss_db(double distance_m, double uav_altitude_m, const TbsConfig& cfg, const PathLossModel& model) {
    const double p = los_probability(distance_m, uav_altitude_m, model);
    const double los = los_path_loss_db(distance_m, cfg.carrier_hz, model);
    if (p >= 1.0) return los;
    const double nlos = nlos_path_loss_db(distance_m, uav_altitude_m, cfg.carrier_hz, model);
    return los * p + nlos * (1.0 - p);
}

namespace {

struct GainTerms {
    TbsGeometry geometry;
    double los_prob;
    double gain_linear;
};

GainTerms gain_terms(const Vec3& uav_pos, const TbsConfig& cfg, const PathLossModel& model) {
    GainTerms t{};
    t.geometry = tbs_geometry(uav_pos, cfg);
    const double altitude = uav_pos.z();
    const double d = std::max(t.geometry.distance_m, 1e-3);
    t.los_prob = los_probability(d, altitude, model);
    const double g_max = pattern_gain_db(t.geometry.azimuth_rad, t.geometry.elevation_rad, cfg);
    const double loss = mean_path_loss_db(d, altitude, cfg, model);
    t.gain_linear = std::pow(10.0, (g_max - loss) / 10.0);
    return t;
}

}  // namespace

double tbs_channel_gain(const Vec3& uav_pos, const TbsConfig& cfg, const PathLossModel& model) {
    return gain_terms(uav_pos, cfg, model).gain_linear;
}

double g2a_sinr(const Vec3& uav_pos, std::size_t serving, std::span<const TbsConfig> all_tbs,
                const NoiseModel& noise, const PathLossModel& model) {
    return g2a_link(uav_pos, serving, all_tbs, noise, model).sinr_linear;
}

LinkSample g2a_link(const Vec3& uav_pos, std::size_t serving, std::span<const TbsConfig> all_tbs,
                    const NoiseModel& noise, const PathLossModel& model) {
    if (all_tbs.empty()) throw std::domain_error("g2a_sinr: no terrestrial base stations");
    if (serving >= all_tbs.size()) throw std::domain_error("g2a_sinr: serving index out of range");
    const TbsConfig& cfg = all_tbs[serving];
    const GainTerms own = gain_terms(uav_pos, cfg, model);
    double interference = 0.0;
    for (std::size_t b = 0; b < all_tbs.size(); ++b) {
        if (b == serving) continue;
        interference += dbm_to_mw(all_tbs[b].tx_power_dbm) * tbs_channel_gain(uav_pos, all_tbs[b], model);
    }
    const double noise_mw = dbm_to_mw(noise.noise_psd_dbm_per_hz) * cfg.bandwidth_hz;
    LinkSample link;
    link.node = static_cast<int>(serving);
    link.distance_m = own.geometry.distance_m;
    link.azimuth_rad = own.geometry.azimuth_rad;
    link.elevation_rad = own.geometry.elevation_rad;
    link.los_prob = own.los_prob;
    link.gain_linear = own.gain_linear;
    link.sinr_linear = dbm_to_mw(cfg.tx_power_dbm) * own.gain_linear / (noise_mw + interference);
    link.rate_bps = cfg.bandwidth_hz * std::log2(1.0 + link.sinr_linear);
    link.weighted_rate_bps = link.rate_bps;
    return link;
}

double haps_channel_gain(double distance_m, std::complex<double> fading, const HapsConfig& cfg) {
    const double free_space = kSpeedOfLight / (4.0 * kPi * distance_m * cfg.carrier_hz);
    return cfg.antenna_gain_linear * free_space * free_space * std::norm(fading);
}

double haps_rate(double bandwidth_frac, double power_frac, double gain_linear, const HapsConfig& cfg,
                 const NoiseModel& noise) {
    if (bandwidth_frac <= 0.0) return 0.0;
    const double bw = bandwidth_frac * cfg.total_bandwidth_hz;
    const double signal = power_frac * dbm_to_mw(cfg.max_uav_tx_power_dbm) * gain_linear;
    return bw * std::log2(1.0 + signal / (bw * dbm_to_mw(noise.noise_psd_dbm_per_hz)));
}

double haps_full_band_snr(double gain_linear, const HapsConfig& cfg, const NoiseModel& noise) {
    return dbm_to_mw(cfg.max_uav_tx_power_dbm) * gain_linear /
           (cfg.total_bandwidth_hz * dbm_to_mw(noise.noise_psd_dbm_per_hz));
}

double weighted_rate(double rate_bps, int quota, int load, bool handover, double gamma) {
    const int share = std::max(1, std::min(quota, load));
    return rate_bps / share * (1.0 - (handover ? gamma : 0.0));
}

}  // namespace skyway::channel
