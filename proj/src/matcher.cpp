#include "microcsi/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace microcsi {

Metric metric_from_string(const std::string& name) {
    if (name == "manhattan") return Metric::manhattan;
    if (name == "euclidean") return Metric::euclidean;
    if (name == "chebyshev") return Metric::chebyshev;
    if (name == "hermitian_angle") return Metric::hermitian_angle;
    if (name == "euclidean_angle") return Metric::euclidean_angle;
    throw std::invalid_argument("unknown metric: " + name);
}

std::string metric_name(Metric m) {
    switch (m) {
        case Metric::manhattan: return "manhattan";
        case Metric::euclidean: return "euclidean";
        case Metric::chebyshev: return "chebyshev";
        case Metric::hermitian_angle: return "hermitian_angle";
        case Metric::euclidean_angle: return "euclidean_angle";
    }
    throw std::logic_error("unreachable");
}

const std::vector<Metric>& all_metrics() {
    static const std::vector<Metric> ms{
        Metric::manhattan, Metric::euclidean, Metric::chebyshev,
        Metric::hermitian_angle, Metric::euclidean_angle};
    return ms;
}

int FingerprintLibrary::default_k(int s) {
    if (s < 1) throw std::invalid_argument("library must hold >= 1 fingerprint");
    return std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(s)))));
}

const Eigen::MatrixXcd& FingerprintLibrary::stacked() const {
    if (stacked_.cols() != size()) {
        const int n = static_cast<int>(fingerprints.front().values.size());
        stacked_.resize(n, size());
        for (int i = 0; i < size(); ++i) stacked_.col(i) = fingerprints[i].values;
    }
    return stacked_;
}

namespace {

double clamped_acos(double x) {
    return std::acos(std::clamp(x, -1.0, 1.0));
}

double distance_kernel(const Eigen::Ref<const Eigen::VectorXcd>& a,
                       const Eigen::Ref<const Eigen::VectorXcd>& b, Metric metric) {
    switch (metric) {
        case Metric::manhattan: {
            Eigen::VectorXcd d = a - b;
            return d.real().cwiseAbs().sum() + d.imag().cwiseAbs().sum();
        }
        case Metric::euclidean:
            return (a - b).norm();
        case Metric::chebyshev: {
            Eigen::VectorXcd d = a - b;
            return std::max(d.real().cwiseAbs().maxCoeff(),
                            d.imag().cwiseAbs().maxCoeff());
        }
        case Metric::hermitian_angle: {
            double na = a.norm(), nb = b.norm();
            if (na == 0.0 || nb == 0.0) {
                throw ZeroNormError("angle metric on zero-norm fingerprint");
            }
            return clamped_acos(std::abs(a.dot(b)) / (na * nb));
        }
        case Metric::euclidean_angle: {
            // real inner product of the realified vectors = Re of the
            // complex inner product
            double na = a.norm(), nb = b.norm();
            if (na == 0.0 || nb == 0.0) {
                throw ZeroNormError("angle metric on zero-norm fingerprint");
            }
            return clamped_acos(a.dot(b).real() / (na * nb));
        }
    }
    throw std::logic_error("unreachable");
}

} // namespace

double fp_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, Metric metric) {
    if (a.size() != b.size()) throw std::invalid_argument("fingerprint length mismatch");
    return distance_kernel(a, b, metric);
}

double fp_distance(const Fingerprint& a, const Fingerprint& b, Metric metric) {
    return fp_distance(a.values, b.values, metric);
}

double auth_distance(const Fingerprint& test, const FingerprintLibrary& lib,
                     Metric metric) {
    const int s = lib.size();
    if (s < 1) throw std::invalid_argument("empty fingerprint library");
    if (lib.k < 1 || lib.k > s) throw std::invalid_argument("k outside [1, S]");

    const Eigen::MatrixXcd& stack = lib.stacked();
    std::vector<double> d(s);
    for (int i = 0; i < s; ++i) {
        d[i] = distance_kernel(test.values, stack.col(i), metric);
    }
    // ties at the k-th position resolve to the earlier library entry, which
    // cannot change the mean; partial_sort is enough
    std::partial_sort(d.begin(), d.begin() + lib.k, d.end());
    double acc = std::accumulate(d.begin(), d.begin() + lib.k, 0.0);
    return acc / static_cast<double>(lib.k);
}

double calibrate_threshold(const std::vector<double>& legit_scores, double target_far) {
    if (legit_scores.empty()) throw EmptyScoresError("no calibration scores");
    if (!(target_far >= 0.0) || target_far >= 1.0) {
        throw std::invalid_argument("target FAR must be in [0, 1)");
    }
    if (target_far == 0.0) {
        return *std::max_element(legit_scores.begin(), legit_scores.end());
    }
    std::vector<double> sorted = legit_scores;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil((1.0 - target_far) * n));
    idx = std::clamp<std::size_t>(idx, 1, sorted.size());
    return sorted[idx - 1];
}

AuthDecision authenticate(const Fingerprint& test, const FingerprintLibrary& lib,
                          double threshold, Metric metric) {
    AuthDecision d;
    d.distance = auth_distance(test, lib, metric);
    d.threshold = threshold;
    d.accept = d.distance <= threshold;
    d.identity_claim = lib.identity;
    d.metric = metric;
    return d;
}

} // namespace microcsi
