#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microcsi/extract.hpp"

namespace microcsi {

inline constexpr double kOmega1 = 2e-3;   // gradient-variance gate
inline constexpr double kOmega2 = 1.0;    // per-subcarrier Z-score gate

struct EmptyBatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Final normalization hit a zero deviation; such a fingerprint carries no
// shape information and cannot be matched.
struct ConstantFingerprintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Outlier-filtered, noise-averaged, Z-score-normalized micro-CSI.
// When normalization ran, values has complex mean 0 and deviation 1 across
// subcarriers.
struct Fingerprint {
    Eigen::VectorXcd values;
    int n_csi_used = 0;          // distinct packets pooled into this fingerprint
    int n_kept = 0;              // batch members surviving the case-2 gate
    std::string device_claim;
    int n_fallback_subcarriers = 0;   // bins where Z-filtering emptied out
};

// Per-subcarrier statistics of a batch.
struct FingerprintBatchStats {
    Eigen::VectorXcd mean;       // u_k
    Eigen::VectorXd deviation;   // sigma_k = sqrt(mean |x - u_k|^2)
    std::vector<int> kept;       // values surviving the Z gate per subcarrier
};

// Which pipeline stages run. Both on is the normal path; the flags exist for
// the ablation sweeps.
struct FingerprintOptions {
    bool outlier_elimination = true;   // case-2 gate + per-subcarrier Z gate
    bool normalize = true;             // final Z-score across subcarriers
};

// Mean squared deviation of the 51 adjacent differences across the ordered
// subcarrier vector. The DC gap counts as adjacent.
double gradient_variance(const Eigen::VectorXcd& values);
inline double gradient_variance(const MicroCsi& mc) { return gradient_variance(mc.values); }

// Keeps members with gradient_variance strictly below omega1.
// Throws EmptyBatchError when nothing survives.
std::vector<MicroCsi> filter_case2(const std::vector<MicroCsi>& batch, double omega1);

FingerprintBatchStats batch_stats(const std::vector<MicroCsi>& batch);

// Case-2 gate, per-subcarrier Z-score outlier removal around (u_k, sigma_k),
// per-subcarrier mean, then Z-score normalization across subcarriers.
// Subcarriers where the Z gate removes everything fall back to u_k and are
// counted in n_fallback_subcarriers. sigma_k = 0 skips the gate for that bin.
Fingerprint construct_fingerprint(const std::vector<MicroCsi>& batch,
                                  double omega1 = kOmega1, double omega2 = kOmega2,
                                  const FingerprintOptions& opts = {});

struct NCsiSelection {
    int n_csi = 0;
    bool converged = false;
};

// Iterates N = 1, 3, 5, ...: builds a fingerprint from the first N
// measurements (each stream entry is one measurement's micro-CSIs, all
// chains) and stops at the first N where the relative l2 change against the
// previous estimate drops below rel_err_threshold. Exhausting the stream
// returns the largest N tried with converged = false.
NCsiSelection select_n_csi(const std::vector<std::vector<MicroCsi>>& stream,
                           double rel_err_threshold,
                           double omega1 = kOmega1, double omega2 = kOmega2);

} // namespace microcsi
