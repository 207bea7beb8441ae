#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "microcsi/fingerprint.hpp"

namespace microcsi {

enum class Metric { manhattan, euclidean, chebyshev, hermitian_angle, euclidean_angle };

Metric metric_from_string(const std::string& name);
std::string metric_name(Metric m);
const std::vector<Metric>& all_metrics();

struct ZeroNormError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyScoresError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Enrollment output for one claimed identity: S fingerprints and the
// neighbor count k used for averaging (default round(sqrt(S)), at least 1).
struct FingerprintLibrary {
    std::string identity;
    std::vector<Fingerprint> fingerprints;
    int k = 1;

    static int default_k(int s);
    int size() const { return static_cast<int>(fingerprints.size()); }

    // 52 x S stack of the fingerprint vectors, built on first use.
    const Eigen::MatrixXcd& stacked() const;

private:
    mutable Eigen::MatrixXcd stacked_;
};

struct AuthDecision {
    double distance = 0.0;
    double threshold = 0.0;
    bool accept = false;
    std::string identity_claim;
    Metric metric = Metric::manhattan;
};

// Distances over the realified 104-dim embedding (manhattan, euclidean,
// chebyshev) or angles from the complex inner product / its realified
// counterpart. Angle metrics reject zero-norm inputs.
double fp_distance(const Fingerprint& a, const Fingerprint& b, Metric metric);
double fp_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, Metric metric);

// Mean of the k smallest distances from test to the library fingerprints.
double auth_distance(const Fingerprint& test, const FingerprintLibrary& lib,
                     Metric metric);

// target_far = 0 accepts the whole calibration set (threshold = max score);
// otherwise the inclusive empirical (1 - target_far) quantile, so the
// achieved FAR on the calibration scores is <= target_far.
double calibrate_threshold(const std::vector<double>& legit_scores,
                           double target_far);

// accept <=> auth_distance <= threshold (boundary accepts).
AuthDecision authenticate(const Fingerprint& test, const FingerprintLibrary& lib,
                          double threshold, Metric metric);

} // namespace microcsi
