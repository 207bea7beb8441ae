#include "microcsi/fingerprint.hpp"

#include <cmath>
#include <set>

namespace microcsi {

double gradient_variance(const Eigen::VectorXcd& values) {
    const int n = static_cast<int>(values.size());
    if (n < 2) throw std::invalid_argument("gradient needs at least 2 entries");
    Eigen::VectorXcd g = values.tail(n - 1) - values.head(n - 1);
    cd mean = g.mean();
    return (g.array() - mean).abs2().mean();
}

std::vector<MicroCsi> filter_case2(const std::vector<MicroCsi>& batch, double omega1) {
    if (batch.empty()) throw EmptyBatchError("empty micro-CSI batch");
    if (!(omega1 > 0.0)) throw std::invalid_argument("omega1 must be positive");
    std::vector<MicroCsi> kept;
    kept.reserve(batch.size());
    for (const auto& mc : batch) {
        if (gradient_variance(mc.values) < omega1) kept.push_back(mc);
    }
    if (kept.empty()) throw EmptyBatchError("every member failed the gradient gate");
    return kept;
}

FingerprintBatchStats batch_stats(const std::vector<MicroCsi>& batch) {
    if (batch.empty()) throw EmptyBatchError("empty micro-CSI batch");
    const int n = static_cast<int>(batch[0].values.size());
    for (const auto& mc : batch) {
        if (mc.values.size() != n) throw std::invalid_argument("ragged batch");
    }
    FingerprintBatchStats st;
    st.mean = Eigen::VectorXcd::Zero(n);
    st.deviation = Eigen::VectorXd::Zero(n);
    st.kept.assign(n, static_cast<int>(batch.size()));
    for (const auto& mc : batch) st.mean += mc.values;
    st.mean /= static_cast<double>(batch.size());
    for (const auto& mc : batch) {
        st.deviation += (mc.values - st.mean).cwiseAbs2();
    }
    st.deviation = (st.deviation / static_cast<double>(batch.size())).cwiseSqrt();
    return st;
}

Fingerprint construct_fingerprint(const std::vector<MicroCsi>& batch,
                                  double omega1, double omega2,
                                  const FingerprintOptions& opts) {
    if (batch.empty()) throw EmptyBatchError("empty micro-CSI batch");

    std::vector<MicroCsi> survivors =
        opts.outlier_elimination ? filter_case2(batch, omega1) : batch;

    const int n = static_cast<int>(survivors[0].values.size());
    FingerprintBatchStats st = batch_stats(survivors);

    Fingerprint fp;
    fp.n_kept = static_cast<int>(survivors.size());
    fp.device_claim = batch.front().device_id;
    {
        std::set<int> packets;
        for (const auto& mc : batch) packets.insert(mc.packet_index);
        fp.n_csi_used = static_cast<int>(packets.size());
    }

    Eigen::VectorXcd fprime(n);
    for (int k = 0; k < n; ++k) {
        // sigma_k = 0 up to rounding means identical values: the gate is moot
        bool degenerate = st.deviation(k) <= 1e-12 * std::abs(st.mean(k));
        if (!opts.outlier_elimination || degenerate) {
            fprime(k) = st.mean(k);
            continue;
        }
        cd acc = 0.0;
        int cnt = 0;
        for (const auto& mc : survivors) {
            if (std::abs(mc.values(k) - st.mean(k)) / st.deviation(k) < omega2) {
                acc += mc.values(k);
                ++cnt;
            }
        }
        st.kept[k] = cnt;
        if (cnt == 0) {
            // Z gate emptied the bin; the pre-gate mean keeps the dimension.
            fprime(k) = st.mean(k);
            ++fp.n_fallback_subcarriers;
        } else {
            fprime(k) = acc / static_cast<double>(cnt);
        }
    }

    if (opts.normalize) {
        cd u = fprime.mean();
        double sigma = std::sqrt((fprime.array() - u).abs2().mean());
        if (sigma == 0.0) {
            throw ConstantFingerprintError("fingerprint is constant across subcarriers");
        }
        fp.values = (fprime.array() - u) / sigma;
    } else {
        fp.values = std::move(fprime);
    }
    return fp;
}

NCsiSelection select_n_csi(const std::vector<std::vector<MicroCsi>>& stream,
                           double rel_err_threshold,
                           double omega1, double omega2) {
    if (stream.empty()) throw std::invalid_argument("empty measurement stream");
    if (!(rel_err_threshold > 0.0)) {
        throw std::invalid_argument("rel_err_threshold must be positive");
    }

    auto build = [&](int n_meas) {
        std::vector<MicroCsi> pooled;
        for (int i = 0; i < n_meas; ++i) {
            pooled.insert(pooled.end(), stream[i].begin(), stream[i].end());
        }
        return construct_fingerprint(pooled, omega1, omega2);
    };

    Fingerprint prev = build(1);
    int prev_n = 1;
    for (int n = 3;; n += 2) {
        if (n > static_cast<int>(stream.size())) return {prev_n, false};
        Fingerprint cur = build(n);
        double e = (cur.values - prev.values).norm() / prev.values.norm();
        if (e < rel_err_threshold) return {n, true};
        prev = std::move(cur);
        prev_n = n;
    }
}

} // namespace microcsi
