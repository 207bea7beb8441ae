#include "microcsi/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>
#include <stdexcept>

namespace microcsi {

namespace {

constexpr std::uint64_t kTagProfile = 0x70726f66696c6531ull;
constexpr std::uint64_t kTagIntensity = 0x696e74656e736974ull;
constexpr std::uint64_t kTagChannel = 0x6368616e6e656c31ull;
constexpr std::uint64_t kTagNoise = 0x6e6f697365737472ull;
constexpr std::uint64_t kTagAnomaly = 0x616e6f6d616c7931ull;
constexpr std::uint64_t kTagInject = 0x696e6a6563743031ull;

constexpr double kLightSpeed = 3e8;          // nominal propagation speed
constexpr double kMaxDistortionMag = 0.2;    // |f| stays well below 1
constexpr int kSmoothWindow = 5;
constexpr double kCase1Scale = 0.3;          // 10x a nominal distortion RMS
constexpr double kCase2ClipRatio = 0.55;     // clip level over time-domain RMS

} // namespace

std::uint64_t Rng::mix(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdull;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ull;
    z ^= z >> 33;
    return z;
}

std::uint64_t Rng::next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t Rng::derive(std::initializer_list<std::uint64_t> labels) {
    std::uint64_t acc = 0x243f6a8885a308d3ull;
    for (std::uint64_t v : labels) {
        acc = mix(acc ^ v) + 0x9e3779b97f4a7c15ull;
    }
    return acc;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::gaussian() {
    double u1 = 1.0 - uniform();   // (0, 1], keeps log finite
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
}

cd Rng::complex_gaussian() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-std::log(u1));   // E[r^2] = 1 split over re/im
    double ang = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(ang), r * std::sin(ang)};
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int needs n >= 1");
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

double rc_pulse(double t, double beta) {
    double sinc = 1.0;
    if (std::abs(t) > 1e-12) {
        sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    }
    if (beta == 0.0) return sinc;
    double u = 2.0 * beta * t;
    double denom = 1.0 - u * u;
    if (std::abs(denom) < 1e-9) {
        // limit of cos(pi*u/2) / (1 - u^2) as |u| -> 1
        return sinc * std::numbers::pi / 4.0;
    }
    return sinc * std::cos(std::numbers::pi * beta * t) / denom;
}

DeviceProfile make_device_profile(const std::string& device_id, double intensity,
                                  std::uint64_t seed, const OfdmGrid& grid) {
    if (intensity <= 0.0 || intensity >= kMaxDistortionMag) {
        throw std::invalid_argument("profile intensity out of (0, 0.2)");
    }
    const int n = grid.n_used();
    DeviceProfile p;
    p.device_id = device_id;
    p.intensity = intensity;
    p.distortion = Eigen::VectorXcd::Zero(n);

    Rng rng(Rng::derive({seed, kTagProfile}));
    const int half = kSmoothWindow / 2;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Eigen::VectorXcd white(n);
        for (int k = 0; k < n; ++k) white(k) = rng.complex_gaussian();

        Eigen::VectorXcd smooth(n);
        for (int k = 0; k < n; ++k) {
            int lo = std::max(0, k - half);
            int hi = std::min(n - 1, k + half);
            cd acc = 0.0;
            for (int j = lo; j <= hi; ++j) acc += white(j);
            smooth(k) = acc / static_cast<double>(hi - lo + 1);
        }

        double rms = std::sqrt(smooth.squaredNorm() / n);
        if (rms == 0.0) continue;
        smooth *= intensity / rms;
        if (smooth.cwiseAbs().maxCoeff() < kMaxDistortionMag) {
            p.distortion = std::move(smooth);
            return p;
        }
    }
    throw std::runtime_error("distortion draw kept exceeding the magnitude bound");
}

ChannelRealization channel_from_delay(double tau, cd gain, int n_p_sim,
                                      const OfdmGrid& grid) {
    ChannelRealization ch;
    ch.n_p_sim = n_p_sim;
    ch.delay_frac = tau - std::floor(tau);
    ch.taps.resize(2 * n_p_sim + 1);
    for (int n = -n_p_sim; n <= n_p_sim; ++n) {
        ch.taps(n + n_p_sim) = gain * rc_pulse(static_cast<double>(n) - tau);
    }
    PartialDft pd(grid, tap_index_set(n_p_sim, grid.n_fft, grid.n_used()));
    ch.freq_response = pd.matrix() * ch.taps;
    return ch;
}

ChannelRealization make_los_channel(std::uint64_t seed, int n_p_sim,
                                    const OfdmGrid& grid) {
    if (n_p_sim < 0) throw std::invalid_argument("tap support must be >= 0");
    Rng rng(Rng::derive({seed, kTagChannel}));
    for (int attempt = 0; attempt < 100; ++attempt) {
        double tau = rng.uniform(-0.5, 0.5);
        double mag = rng.uniform(0.5, 2.0);
        double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        ChannelRealization ch =
            channel_from_delay(tau, std::polar(mag, phase), n_p_sim, grid);
        // |tau| <= 0.5 keeps the center sample on the pulse peak; ties can
        // only occur at tau = -0.5 exactly, redraw if the invariant slips.
        bool center_strongest = true;
        double center = std::abs(ch.taps(n_p_sim));
        for (int i = 0; i < ch.taps.size(); ++i) {
            if (i != n_p_sim && std::abs(ch.taps(i)) >= center) {
                center_strongest = false;
                break;
            }
        }
        if (center_strongest) return ch;
    }
    throw std::runtime_error("could not draw a channel with a dominant center tap");
}

std::vector<CsiMeasurement> synthesize_csi(const DeviceProfile& profile,
                                           const std::vector<ChannelRealization>& channels,
                                           double snr_db, int n_packets,
                                           std::uint64_t seed) {
    if (channels.empty()) throw std::invalid_argument("need at least one chain");
    if (n_packets < 1) throw std::invalid_argument("need at least one packet");
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
        throw std::invalid_argument("snr_db must be a real value or +inf");
    }
    const int n = static_cast<int>(profile.distortion.size());
    for (const auto& ch : channels) {
        if (ch.freq_response.size() != n) {
            throw std::invalid_argument("channel/profile grid size mismatch");
        }
    }
    const bool noiseless = std::isinf(snr_db);

    std::vector<CsiMeasurement> out;
    out.reserve(n_packets);
    Eigen::VectorXcd one_plus_f = profile.distortion.array() + 1.0;
    for (int p = 0; p < n_packets; ++p) {
        CsiMeasurement m;
        m.device_id = profile.device_id;
        m.packet_index = p;
        if (!noiseless) m.snr_db = snr_db;
        m.chains.reserve(channels.size());
        for (std::size_t i = 0; i < channels.size(); ++i) {
            Eigen::VectorXcd c = channels[i].freq_response.cwiseProduct(one_plus_f);
            if (!noiseless) {
                double sp = c.squaredNorm() / n;
                double sigma = std::sqrt(sp * std::pow(10.0, -snr_db / 10.0));
                Rng rng(Rng::derive({seed, kTagNoise,
                                     static_cast<std::uint64_t>(p),
                                     static_cast<std::uint64_t>(i)}));
                for (int k = 0; k < n; ++k) c(k) += sigma * rng.complex_gaussian();
            }
            m.chains.push_back(std::move(c));
        }
        out.push_back(std::move(m));
    }
    return out;
}

namespace {

// 52-bin spectrum <-> 64-sample time signal, unitary convention, guard and
// DC bins held at zero. Direct sums; 64 points do not justify an FFT dep.
Eigen::VectorXcd bins_to_time(const Eigen::VectorXcd& c, const OfdmGrid& grid) {
    const int nf = grid.n_fft;
    const double scale = 1.0 / std::sqrt(static_cast<double>(nf));
    Eigen::VectorXcd t = Eigen::VectorXcd::Zero(nf);
    for (int s = 0; s < nf; ++s) {
        cd acc = 0.0;
        for (int r = 0; r < grid.n_used(); ++r) {
            long kn = static_cast<long>(grid.subcarriers[r]) * s;
            long m = ((kn % nf) + nf) % nf;
            double ang = 2.0 * std::numbers::pi * static_cast<double>(m) / nf;
            acc += c(r) * cd(std::cos(ang), std::sin(ang));
        }
        t(s) = scale * acc;
    }
    return t;
}

Eigen::VectorXcd time_to_bins(const Eigen::VectorXcd& t, const OfdmGrid& grid) {
    const int nf = grid.n_fft;
    const double scale = 1.0 / std::sqrt(static_cast<double>(nf));
    Eigen::VectorXcd c(grid.n_used());
    for (int r = 0; r < grid.n_used(); ++r) {
        cd acc = 0.0;
        for (int s = 0; s < nf; ++s) {
            long kn = static_cast<long>(grid.subcarriers[r]) * s;
            long m = ((kn % nf) + nf) % nf;
            double ang = -2.0 * std::numbers::pi * static_cast<double>(m) / nf;
            acc += t(s) * cd(std::cos(ang), std::sin(ang));
        }
        c(r) = scale * acc;
    }
    return c;
}

} // namespace

void inject_abnormal(CsiMeasurement& m, AnomalyKind kind, std::uint64_t seed,
                     const OfdmGrid& grid) {
    if (m.chains.empty()) throw std::invalid_argument("measurement has no chains");
    const int n = grid.n_used();
    for (const auto& c : m.chains) {
        if (c.size() != n) throw std::invalid_argument("measurement/grid size mismatch");
    }
    Rng rng(Rng::derive({seed, kTagInject, static_cast<std::uint64_t>(m.packet_index),
                         kind == AnomalyKind::case1 ? 1ull : 2ull}));
    if (kind == AnomalyKind::case1) {
        int n_bad = 2 + rng.uniform_int(3);
        std::set<int> bins;
        while (static_cast<int>(bins.size()) < n_bad) bins.insert(rng.uniform_int(n));
        for (auto& chain : m.chains) {
            for (int k : bins) {
                double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                chain(k) += kCase1Scale * std::abs(chain(k)) *
                            cd(std::cos(phase), std::sin(phase));
            }
        }
        m.flags.push_back("case1");
    } else {
        for (auto& chain : m.chains) {
            Eigen::VectorXcd t = bins_to_time(chain, grid);
            double rms = std::sqrt(t.squaredNorm() / t.size());
            double limit = kCase2ClipRatio * rms;
            for (int s = 0; s < t.size(); ++s) {
                double mag = std::abs(t(s));
                if (mag > limit) t(s) *= limit / mag;
            }
            chain = time_to_bins(t, grid);
        }
        m.flags.push_back("case2");
    }
}

double doppler_shift(double speed_mps, double carrier_hz) {
    return speed_mps * carrier_hz / kLightSpeed;
}

double ici_upper_bound(double doppler_hz, double sample_period) {
    double x = 2.0 * std::numbers::pi * doppler_hz * sample_period;
    return x * x / 12.0;
}

std::string fleet_device_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "dev%02d", index);
    return buf;
}

std::vector<CsiMeasurement> generate_fleet(const Scenario& sc, const OfdmGrid& grid) {
    if (sc.n_devices < 1 || sc.n_packets < 1 || sc.n_rx < 1) {
        throw std::invalid_argument("fleet needs >= 1 device, packet and chain");
    }
    if (sc.case1_rate < 0 || sc.case2_rate < 0 ||
        sc.case1_rate + sc.case2_rate > 1.0) {
        throw std::invalid_argument("anomaly rates must be in [0,1] and sum <= 1");
    }
    if (sc.intensity_min > sc.intensity_max) {
        throw std::invalid_argument("intensity_min > intensity_max");
    }

    std::vector<CsiMeasurement> out;
    out.reserve(static_cast<std::size_t>(sc.n_devices) * sc.n_packets);
    const double fd = doppler_shift(sc.speed_mps, sc.carrier_hz);

    for (int d = 0; d < sc.n_devices; ++d) {
        std::uint64_t du = static_cast<std::uint64_t>(d);
        Rng irng(Rng::derive({sc.seed, kTagIntensity, du}));
        double intensity = irng.uniform(sc.intensity_min, sc.intensity_max);
        DeviceProfile profile = make_device_profile(
            fleet_device_id(d), intensity, Rng::derive({sc.seed, kTagProfile, du}), grid);

        std::vector<ChannelRealization> channels;
        channels.reserve(sc.n_rx);
        for (int i = 0; i < sc.n_rx; ++i) {
            channels.push_back(make_los_channel(
                Rng::derive({sc.channel_seed, kTagChannel, du,
                             static_cast<std::uint64_t>(i)}),
                sc.n_p_sim, grid));
        }

        auto ms = synthesize_csi(profile, channels, sc.snr_db, sc.n_packets,
                                 Rng::derive({sc.seed, kTagNoise, du}));

        Rng arng(Rng::derive({sc.seed, kTagAnomaly, du}));
        for (auto& m : ms) {
            double u = arng.uniform();
            if (u < sc.case1_rate) {
                inject_abnormal(m, AnomalyKind::case1,
                                Rng::derive({sc.seed, kTagInject, du}), grid);
            } else if (u < sc.case1_rate + sc.case2_rate) {
                inject_abnormal(m, AnomalyKind::case2,
                                Rng::derive({sc.seed, kTagInject, du}), grid);
            }
            if (sc.speed_mps > 0.0) {
                // Mobility acts as a common phase ramp across packets; the
                // per-bin channel shape is unchanged at these speeds.
                double ang = 2.0 * std::numbers::pi * fd * sc.packet_interval_s *
                             static_cast<double>(m.packet_index);
                cd rot(std::cos(ang), std::sin(ang));
                for (auto& chain : m.chains) chain *= rot;
            }
            out.push_back(std::move(m));
        }
    }
    return out;
}

} // namespace microcsi
