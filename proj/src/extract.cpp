#include "microcsi/extract.hpp"

#include <cmath>
#include <limits>

namespace microcsi {

ChannelEstimate estimate_channel_ls(const Eigen::VectorXcd& csi_chain,
                                    const PartialDft& pdft) {
    if (csi_chain.size() != pdft.matrix().rows()) {
        throw std::invalid_argument("chain length does not match the grid");
    }
    ChannelEstimate est;
    est.tap_coefficients = pdft.solve_taps(csi_chain);
    // F * a rather than Q1 Q1^H c keeps freq_response exactly in span(F).
    est.freq_response = pdft.matrix() * est.tap_coefficients;
    return est;
}

Eigen::VectorXcd extract_micro_values(const Eigen::VectorXcd& csi_chain,
                                      const PartialDft& pdft, double eps_fade) {
    ChannelEstimate est = estimate_channel_ls(csi_chain, pdft);
    Eigen::VectorXd mags = est.freq_response.cwiseAbs();
    double peak = mags.maxCoeff();
    if (peak == 0.0 || mags.minCoeff() < eps_fade * peak) {
        throw DeepFadeError("channel estimate has a near-zero subcarrier");
    }
    return csi_chain.cwiseQuotient(est.freq_response);
}

std::vector<MicroCsi> extract_micro_csi(const CsiMeasurement& m,
                                        const PartialDft& pdft, double eps_fade) {
    std::vector<MicroCsi> out;
    out.reserve(m.chains.size());
    for (std::size_t i = 0; i < m.chains.size(); ++i) {
        MicroCsi mc;
        mc.values = extract_micro_values(m.chains[i], pdft, eps_fade);
        mc.device_id = m.device_id;
        mc.packet_index = m.packet_index;
        mc.chain_index = static_cast<int>(i);
        out.push_back(std::move(mc));
    }
    return out;
}

double estimate_snr(const Eigen::VectorXcd& lts_copy1,
                    const Eigen::VectorXcd& lts_copy2) {
    if (lts_copy1.size() != lts_copy2.size() || lts_copy1.size() == 0) {
        throw std::invalid_argument("SNR estimate needs two equal-length copies");
    }
    const double n = static_cast<double>(lts_copy1.size());
    double signal = (lts_copy1.squaredNorm() + lts_copy2.squaredNorm()) / (2.0 * n);
    double noise = (lts_copy1 - lts_copy2).squaredNorm() / (2.0 * n);
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / noise);
}

} // namespace microcsi
