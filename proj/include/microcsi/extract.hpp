#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microcsi/ofdm.hpp"
#include "microcsi/sim.hpp"

namespace microcsi {

// The least-squares channel estimate left a subcarrier too close to zero;
// dividing there would blow up, so the measurement should be dropped.
struct DeepFadeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ChannelEstimate {
    Eigen::VectorXcd freq_response;     // P * c, in the tap subspace
    Eigen::VectorXcd tap_coefficients;  // LS minimizer of ||F a - c||
};

// Residual ratio after dividing out the channel estimate: approximately
// 1 + f with f the transmitter's multiplicative distortion.
struct MicroCsi {
    Eigen::VectorXcd values;
    std::string device_id;
    int packet_index = 0;
    int chain_index = 0;
};

// Tap-domain LS fit of one chain; freq_response is the projection of c onto
// the tap subspace.
ChannelEstimate estimate_channel_ls(const Eigen::VectorXcd& csi_chain,
                                    const PartialDft& pdft);

// values = c ./ (P c) elementwise, one result per receive chain. Throws
// DeepFadeError when any |h_hat| drops below eps_fade * max|h_hat|.
std::vector<MicroCsi> extract_micro_csi(const CsiMeasurement& m,
                                        const PartialDft& pdft,
                                        double eps_fade = 1e-3);

// Single-chain core of extract_micro_csi.
Eigen::VectorXcd extract_micro_values(const Eigen::VectorXcd& csi_chain,
                                      const PartialDft& pdft,
                                      double eps_fade = 1e-3);

// Split-symbol SNR estimate from two received copies of one training symbol:
// signal = mean |value|^2 over both copies, noise = mean |c1 - c2|^2 / 2,
// returned as 10*log10(signal/noise). Identical copies give +inf.
double estimate_snr(const Eigen::VectorXcd& lts_copy1,
                    const Eigen::VectorXcd& lts_copy2);

} // namespace microcsi
