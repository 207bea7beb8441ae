#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microcsi/ofdm.hpp"

namespace microcsi {

// Deterministic generator: splitmix64 stream + Box-Muller normals.
// The standard library distributions are unspecified across implementations,
// and outputs here must be byte-identical for a given (seed, config).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double gaussian();                      // standard normal
    cd complex_gaussian();                  // circular, E|z|^2 = 1
    int uniform_int(int n);                 // {0, .., n-1}

    // Stable substream derivation: fold labels into one 64-bit state so
    // per-packet/per-chain streams never overlap.
    static std::uint64_t derive(std::initializer_list<std::uint64_t> labels);

private:
    static std::uint64_t mix(std::uint64_t z);
    std::uint64_t state_;
};

// Multiplicative hardware distortion of one transmitter, one value per used
// subcarrier. Small (|f| well under 1) and fixed for the lifetime of a device.
struct DeviceProfile {
    std::string device_id;
    Eigen::VectorXcd distortion;   // f, length = grid.n_used()
    double intensity = 0.0;        // RMS of f
};

// One wireless channel draw: delay-domain taps on a short support and the
// matching frequency response on the used subcarriers.
struct ChannelRealization {
    Eigen::VectorXcd taps;         // ordered -n_p_sim .. n_p_sim
    Eigen::VectorXcd freq_response;
    double delay_frac = 0.0;       // fractional delay in [0, 1) samples
    int n_p_sim = 0;
};

// One captured OFDM estimate: per receive chain, genie CSI on the used bins.
struct CsiMeasurement {
    std::string device_id;
    int packet_index = 0;
    std::vector<Eigen::VectorXcd> chains;          // size n_rx
    std::optional<double> snr_db;                  // absent = unknown
    std::vector<std::string> flags;                // injected anomalies etc.

    int n_rx() const { return static_cast<int>(chains.size()); }
};

enum class AnomalyKind { case1, case2 };

// Fleet/dataset generation knobs. Intensities are drawn uniformly per device
// from [intensity_min, intensity_max].
struct Scenario {
    int n_devices = 15;
    int n_packets = 1000;
    int n_rx = 4;
    double snr_db = 34.0;
    double intensity_min = 0.02;
    double intensity_max = 0.04;
    int n_p_sim = 8;
    double case1_rate = 0.0;
    double case2_rate = 0.0;
    double speed_mps = 0.0;
    double carrier_hz = 2.457e9;
    double packet_interval_s = 50e-6;
    std::uint64_t seed = 1;
    std::uint64_t channel_seed = 1;   // channels redrawn independently of devices
};

// Raised-cosine pulse, roll-off beta, evaluated at t in samples:
// g(t) = sinc(t) * cos(pi*beta*t) / (1 - (2*beta*t)^2), g(0) = 1.
// Removable singularity at |t| = 1/(2*beta) handled analytically.
double rc_pulse(double t, double beta = 0.5);

// Smooth random distortion profile with RMS = intensity: white complex
// Gaussian across subcarriers, moving-average window 5, rescaled; redrawn
// until max |f| < 0.2.
DeviceProfile make_device_profile(const std::string& device_id, double intensity,
                                  std::uint64_t seed, const OfdmGrid& grid);

// Line-of-sight channel: RC pulse sampled at integer offsets minus a random
// fractional delay tau in [-0.5, 0.5), times a random complex gain. Center
// tap strictly strongest. freq_response = F_{K,L} * taps, so the response is
// exactly inside the order-n_p_sim tap subspace.
ChannelRealization make_los_channel(std::uint64_t seed, int n_p_sim,
                                    const OfdmGrid& grid);

// Deterministic variant used by tests: fixed delay and gain.
ChannelRealization channel_from_delay(double tau, cd gain, int n_p_sim,
                                      const OfdmGrid& grid);

// c = h .* (1 + f) + z per chain, one channel per chain. Noise variance per
// bin is mean|h.*(1+f)|^2 * 10^(-snr_db/10) for that chain; snr_db = +inf
// means noiseless (the field is stored only when finite). NaN or -inf snr_db
// is rejected.
std::vector<CsiMeasurement> synthesize_csi(const DeviceProfile& profile,
                                           const std::vector<ChannelRealization>& channels,
                                           double snr_db, int n_packets,
                                           std::uint64_t seed);

// Corrupt a measurement in place and tag it.
// case1: add perturbations of magnitude 0.3*|c_k| at 2..4 random subcarriers
//        (same bins on every chain, random phases).
// case2: clip time-domain magnitudes at 0.55 * RMS, which spreads broadband
//        distortion across all bins.
void inject_abnormal(CsiMeasurement& m, AnomalyKind kind, std::uint64_t seed,
                     const OfdmGrid& grid);

// Doppler shift in Hz for a terminal moving at v m/s.
double doppler_shift(double speed_mps, double carrier_hz);

// Upper bound on inter-carrier-interference power relative to signal power
// for Doppler fd over one OFDM sample: (2*pi*fd*Ts)^2 / 12.
double ici_upper_bound(double doppler_hz, double sample_period);

// Full synthetic dataset: per device a profile, per chain an independent
// channel, optional anomaly injection and per-packet Doppler phase rotation.
std::vector<CsiMeasurement> generate_fleet(const Scenario& sc, const OfdmGrid& grid);

std::string fleet_device_id(int index);

} // namespace microcsi
