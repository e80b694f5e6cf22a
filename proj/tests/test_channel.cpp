#include "oracles.hpp"
#include "skyway/channel.hpp"
#include "skyway/config.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace skyway;
using namespace skyway::channel;

namespace {

oracle::Site site_of(const TbsConfig& t) {
    return {t.position_m.x(), t.position_m.y(), t.position_m.z(), t.tx_power_dbm, t.num_antennas,
            t.downtilt_rad, t.bandwidth_hz, t.carrier_hz, t.peak_element_gain_dbi, t.sidelobe_limit_db,
            t.sla_db, t.half_power_beamwidth_rad, t.sectors};
}

oracle::Plm plm_of(const PathLossModel& m) {
    return {m.los_intercept_db, m.los_distance_slope, m.nlos_intercept_db, m.nlos_distance_slope_base,
            m.nlos_distance_slope_altitude, m.assume_los_band, m.los_band_min_altitude_m, m.los_band_max_altitude_m};
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("element gain") {
    TbsConfig t;
    CHECK(element_gain_db(0.0, 0.0, t) == 8.0);
    CHECK(element_gain_db(t.half_power_beamwidth_rad, 0.0, t) == doctest::Approx(-4.0));
    CHECK(element_gain_db(3.0, 1.5, t) == doctest::Approx(8.0 - t.sidelobe_limit_db));
}

TEST_CASE("array factor") {
    TbsConfig t;
    CHECK(array_factor_amplitude(t.downtilt_rad, t) == doctest::Approx(std::sqrt(8.0)));
    TbsConfig one = t;
    one.num_antennas = 1;
    for (double z : {-0.5, 0.1, 0.7, 1.2}) CHECK(array_factor_amplitude(z, one) == doctest::Approx(1.0));
    // N pi/2 (sin z - sin z_d) = pi  ->  null.
    const double z = std::asin(std::sin(t.downtilt_rad) + 2.0 / 8.0);
    CHECK(std::abs(array_factor_amplitude(z, t)) < 1e-12);
}

TEST_CASE("line-of-sight probability") {
    PathLossModel m;
    m.assume_los_band = false;
    CHECK(los_probability(220.0, 100.0, m) == 1.0);
    CHECK(los_probability(219.0, 100.0, m) == 1.0);
    CHECK(los_probability(400.0, 100.0, m) < 1.0);
    CHECK(los_probability(18.0, 20.0, m) == 1.0);
    PathLossModel band;
    CHECK(los_probability(5000.0, 150.0, band) == 1.0);
    CHECK_THROWS_AS(los_probability(10.0, 0.0, m), std::domain_error);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(1.0, 5000.0), h(1.0, 400.0);
    for (int i = 0; i < 200; ++i) {
        const double p = los_probability(d(rng), h(rng), m);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("path loss mixture bounds") {
    TbsConfig t;
    PathLossModel m;
    m.assume_los_band = false;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> d(20.0, 3000.0), h(10.0, 90.0);
    for (int i = 0; i < 100; ++i) {
        const double dd = d(rng), hh = h(rng);
        const double l = mean_path_loss_db(dd, hh, t, m);
        const double a = los_path_loss_db(dd, t.carrier_hz, m);
        const double b = nlos_path_loss_db(dd, hh, t.carrier_hz, m);
        CHECK(l >= std::min(a, b) - 1e-9);
        CHECK(l <= std::max(a, b) + 1e-9);
    }
    PathLossModel band;
    CHECK(mean_path_loss_db(400.0, 150.0, t, band) == los_path_loss_db(400.0, t.carrier_hz, band));
}

TEST_CASE("sinr fixtures") {
    TbsConfig t;
    const Vec3 uav{300.0, 40.0, 150.0};
    std::vector<TbsConfig> single{t};
    const double noise = dbm_to_mw(-174.0) * t.bandwidth_hz;
    const double g = tbs_channel_gain(uav, t);
    CHECK(g2a_sinr(uav, 0, single) == doctest::Approx(dbm_to_mw(t.tx_power_dbm) * g / noise).epsilon(1e-12));
    std::vector<TbsConfig> twin{t, t};
    const double s = dbm_to_mw(t.tx_power_dbm) * g;
    CHECK(g2a_sinr(uav, 0, twin) == doctest::Approx(s / (noise + s)).epsilon(1e-12));
    CHECK_THROWS_AS(g2a_sinr(uav, 0, std::vector<TbsConfig>{}), std::domain_error);
}

TEST_CASE("sinr pipeline matches the straight-line evaluator") {
    const auto tbs = NetworkConfig::default_tbs();
    std::vector<oracle::Site> sites;
    for (const auto& t : tbs) sites.push_back(site_of(t));
    for (bool band : {true, false}) {
        PathLossModel model;
        model.assume_los_band = band;
        std::mt19937_64 rng(band ? 11 : 12);
        std::uniform_real_distribution<double> xy(0.0, 1000.0), z(30.0, 300.0);
        for (int i = 0; i < 50; ++i) {
            const Vec3 p{xy(rng), xy(rng), z(rng)};
            const int serving = i % static_cast<int>(tbs.size());
            const double ours = g2a_sinr(p, serving, tbs, {}, model);
            const double ref = oracle::g2a_sinr(p.x(), p.y(), p.z(), serving, sites, plm_of(model), -174.0);
            CHECK(std::abs(ours - ref) / ref < 1e-9);
        }
    }
}

TEST_CASE("sinr decreases with distance along boresight") {
    TbsConfig t;
    std::vector<TbsConfig> one{t};
    double prev = 1e300;
    for (double x = 50.0; x < 2000.0; x += 50.0) {
        const double s = g2a_sinr({x, 0.0, t.position_m.z()}, 0, one);
        CHECK(s <= prev);
        prev = s;
    }
}

TEST_CASE("rician fading") {
    std::mt19937_64 a(5), b(5);
    for (int i = 0; i < 10; ++i) CHECK(rician_sample(15.0, a) == rician_sample(15.0, b));
    std::mt19937_64 rng(6);
    CHECK(std::abs(rician_sample(300.0, rng)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
    double acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc += std::norm(rician_sample(15.0, rng, true));
    CHECK(acc / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("haps gain and rate") {
    HapsConfig h;
    h.antenna_gain_linear = 1.0;
    const double expected = std::pow(3e8 / (4.0 * kPi * 2e4 * 2e9), 2.0);
    CHECK(haps_channel_gain(2e4, 1.0, h) == doctest::Approx(expected).epsilon(1e-3));
    CHECK(haps_channel_gain(4e4, 1.0, h) == doctest::Approx(haps_channel_gain(2e4, 1.0, h) / 4.0));
    CHECK(haps_channel_gain(2e4, 0.0, h) == 0.0);

    const double g = haps_channel_gain(2e4, 0.7, h);
    CHECK(haps_rate(0.5, 0.0, g, h) == 0.0);
    CHECK(haps_rate(0.0, 1.0, g, h) == 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 10; ++i) {
        const double r = haps_rate(0.3, i / 10.0, g, h);
        CHECK(r > prev);
        prev = r;
    }
    std::vector<double> r;
    for (int i = 1; i <= 100; ++i) r.push_back(haps_rate(i / 100.0, 1.0, g, h));
    for (std::size_t i = 1; i + 1 < r.size(); ++i) CHECK(r[i + 1] - 2.0 * r[i] + r[i - 1] <= 1e-6);
}

TEST_CASE("weighted rate") {
    CHECK(weighted_rate(10.0, 5, 1, false, 0.2) == 10.0);
    CHECK(weighted_rate(9.0, 5, 3, true, 0.2) == doctest::Approx(0.8 * 3.0));
    CHECK(weighted_rate(10.0, 5, 10, false, 0.2) == doctest::Approx(2.0));
    CHECK(weighted_rate(10.0, 5, 0, false, 0.2) == 10.0);
    for (int n = 0; n <= 10; ++n) {
        for (bool ho : {false, true}) {
            const double w = weighted_rate(7.0, 5, n, ho, 0.2);
            CHECK(w == doctest::Approx(oracle::weighted_rate(7.0, 5, n, ho, 0.2)).epsilon(1e-15));
            CHECK(w <= 7.0);
            CHECK((w == 7.0) == (n <= 1 && !ho));
        }
    }
}

}
