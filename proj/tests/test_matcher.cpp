#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "microcsi/matcher.hpp"

using namespace microcsi;
using cd = std::complex<double>;

namespace {

Fingerprint fp_of(const Eigen::VectorXcd& v, const std::string& claim = "t") {
    Fingerprint fp;
    fp.values = v;
    fp.device_claim = claim;
    return fp;
}

Eigen::VectorXcd random_vec(std::mt19937& gen, int n = 52) {
    std::normal_distribution<double> nd;
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = cd(nd(gen), nd(gen));
    return v;
}

const std::vector<Metric> kMinkowski{Metric::manhattan, Metric::euclidean,
                                     Metric::chebyshev};

} // namespace

TEST_CASE("toy distances") {
    Eigen::VectorXcd a(2), b(2);
    a << cd(1, 0), cd(0, 0);
    b << cd(0, 0), cd(0, 1);
    CHECK(fp_distance(a, b, Metric::manhattan) == doctest::Approx(2.0));
    CHECK(fp_distance(a, b, Metric::euclidean) == doctest::Approx(std::sqrt(2.0)));
    CHECK(fp_distance(a, b, Metric::chebyshev) == doctest::Approx(1.0));
    // orthogonal vectors sit at a right angle under both angle metrics
    CHECK(fp_distance(a, b, Metric::hermitian_angle) ==
          doctest::Approx(std::numbers::pi / 2));
    CHECK(fp_distance(a, b, Metric::euclidean_angle) ==
          doctest::Approx(std::numbers::pi / 2));

    Eigen::VectorXcd c(3);
    c.setZero();
    CHECK_THROWS_AS(fp_distance(a, c, Metric::manhattan), std::invalid_argument);
}

TEST_CASE("self distance is zero") {
    std::mt19937 gen(7);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXcd v = random_vec(gen);
        for (Metric m : kMinkowski) CHECK(fp_distance(v, v, m) == 0.0);
        // acos near 1 amplifies rounding into ~1e-8
        CHECK(fp_distance(v, v, Metric::hermitian_angle) <= 1e-7);
        CHECK(fp_distance(v, v, Metric::euclidean_angle) <= 1e-7);
    }
}

TEST_CASE("metric axioms on random pairs") {
    std::mt19937 gen(11);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXcd a = random_vec(gen);
        Eigen::VectorXcd b = random_vec(gen);
        Eigen::VectorXcd c = random_vec(gen);
        for (Metric m : all_metrics()) {
            double dab = fp_distance(a, b, m);
            double dba = fp_distance(b, a, m);
            CHECK(dab >= 0.0);
            CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
        }
        for (Metric m : kMinkowski) {
            double dab = fp_distance(a, b, m);
            double dac = fp_distance(a, c, m);
            double dcb = fp_distance(c, b, m);
            CHECK(dab <= (dac + dcb) * (1.0 + 1e-12));
        }
        // |z| >= Re z, so the hermitian angle never exceeds the euclidean one
        CHECK(fp_distance(a, b, Metric::hermitian_angle) <=
              fp_distance(a, b, Metric::euclidean_angle) + 1e-12);
    }
}

TEST_CASE("phase rotation sensitivity") {
    std::mt19937 gen(13);
    Eigen::VectorXcd a = random_vec(gen);
    Eigen::VectorXcd rot = a * std::polar(1.0, std::numbers::pi / 2);
    CHECK(fp_distance(a, rot, Metric::hermitian_angle) <= 1e-7);
    CHECK(fp_distance(a, rot, Metric::euclidean_angle) ==
          doctest::Approx(std::numbers::pi / 2));
    CHECK(fp_distance(a, rot, Metric::manhattan) > 1.0);
}

TEST_CASE("angle metrics reject zero norm") {
    Eigen::VectorXcd z = Eigen::VectorXcd::Zero(52);
    std::mt19937 gen(17);
    Eigen::VectorXcd a = random_vec(gen);
    CHECK_THROWS_AS(fp_distance(z, a, Metric::hermitian_angle), ZeroNormError);
    CHECK_THROWS_AS(fp_distance(a, z, Metric::euclidean_angle), ZeroNormError);
    for (Metric m : kMinkowski) CHECK(fp_distance(z, a, m) > 0.0);
}

TEST_CASE("metric names round trip") {
    for (Metric m : all_metrics()) CHECK(metric_from_string(metric_name(m)) == m);
    CHECK(all_metrics().size() == 5);
    CHECK_THROWS_AS(metric_from_string("cosine"), std::invalid_argument);
}

TEST_CASE("default k is round sqrt of s") {
    CHECK(FingerprintLibrary::default_k(1) == 1);
    CHECK(FingerprintLibrary::default_k(2) == 1);
    CHECK(FingerprintLibrary::default_k(3) == 2);
    CHECK(FingerprintLibrary::default_k(100) == 10);
    CHECK(FingerprintLibrary::default_k(2000) == 45);
    CHECK_THROWS_AS(FingerprintLibrary::default_k(0), std::invalid_argument);
}

TEST_CASE("auth distance matches a brute force knn mean") {
    std::mt19937 gen(19);
    FingerprintLibrary lib;
    lib.identity = "dev";
    for (int i = 0; i < 10; ++i) lib.fingerprints.push_back(fp_of(random_vec(gen)));
    lib.k = 3;
    Fingerprint test = fp_of(random_vec(gen));

    for (Metric m : all_metrics()) {
        std::vector<double> d;
        for (const auto& f : lib.fingerprints) d.push_back(fp_distance(test, f, m));
        std::sort(d.begin(), d.end());
        double expect = (d[0] + d[1] + d[2]) / 3.0;
        CHECK(auth_distance(test, lib, m) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("auth distance degenerate and guards") {
    std::mt19937 gen(23);
    Fingerprint only = fp_of(random_vec(gen));
    Fingerprint test = fp_of(random_vec(gen));

    FingerprintLibrary lib;
    lib.identity = "dev";
    lib.fingerprints.push_back(only);
    lib.k = 1;
    // single-entry library collapses to a plain distance
    CHECK(auth_distance(test, lib, Metric::manhattan) ==
          doctest::Approx(fp_distance(test, only, Metric::manhattan)));

    FingerprintLibrary empty;
    CHECK_THROWS_AS(auth_distance(test, empty, Metric::manhattan),
                    std::invalid_argument);

    lib.k = 0;
    CHECK_THROWS_AS(auth_distance(test, lib, Metric::manhattan),
                    std::invalid_argument);
    lib.k = 2;
    CHECK_THROWS_AS(auth_distance(test, lib, Metric::manhattan),
                    std::invalid_argument);
}

TEST_CASE("auth distance mean of k smallest closed form") {
    FingerprintLibrary lib;
    lib.identity = "dev";
    for (double alpha : {1.0, 2.0, 3.0, 4.0}) {
        lib.fingerprints.push_back(
            fp_of(Eigen::VectorXcd::Constant(52, cd(alpha, 0.0))));
    }
    lib.k = 2;
    Fingerprint test = fp_of(Eigen::VectorXcd::Zero(52));
    // distances are 52*alpha, two smallest average to 52*1.5
    CHECK(auth_distance(test, lib, Metric::manhattan) == doctest::Approx(78.0));
}

TEST_CASE("calibrate threshold quantiles") {
    CHECK(calibrate_threshold({1.0, 2.0, 3.0}, 0.0) == 3.0);
    CHECK(calibrate_threshold({3.0, 1.0, 2.0}, 0.0) == 3.0);

    std::vector<double> scores;
    for (int i = 1; i <= 100; ++i) scores.push_back(static_cast<double>(i));
    std::mt19937 gen(29);
    std::shuffle(scores.begin(), scores.end(), gen);
    CHECK(calibrate_threshold(scores, 0.01) == 99.0);
    CHECK(calibrate_threshold(scores, 0.25) == 75.0);

    CHECK(calibrate_threshold({5.0}, 0.5) == 5.0);

    CHECK_THROWS_AS(calibrate_threshold({}, 0.0), EmptyScoresError);
    CHECK_THROWS_AS(calibrate_threshold({1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_threshold({1.0}, -0.1), std::invalid_argument);
}

TEST_CASE("calibrated threshold bounds the achieved rate") {
    std::mt19937 gen(31);
    std::uniform_real_distribution<double> ud(0.0, 10.0);
    std::vector<double> scores;
    for (int i = 0; i < 37; ++i) scores.push_back(ud(gen));

    for (double far : {0.0, 0.05, 0.1, 0.3}) {
        double thr = calibrate_threshold(scores, far);
        CHECK(std::count(scores.begin(), scores.end(), thr) >= 1);
        double over = 0.0;
        for (double s : scores)
            if (s > thr) over += 1.0;
        CHECK(over / static_cast<double>(scores.size()) <= far);
    }
}

TEST_CASE("authenticate boundary and fields") {
    std::mt19937 gen(37);
    FingerprintLibrary lib;
    lib.identity = "station-9";
    for (int i = 0; i < 4; ++i) lib.fingerprints.push_back(fp_of(random_vec(gen)));
    lib.k = 2;
    Fingerprint test = fp_of(random_vec(gen));

    double d = auth_distance(test, lib, Metric::euclidean);
    AuthDecision at = authenticate(test, lib, d, Metric::euclidean);
    CHECK(at.accept); // boundary accepts
    CHECK(at.distance == doctest::Approx(d));
    CHECK(at.threshold == d);
    CHECK(at.identity_claim == "station-9");
    CHECK(at.metric == Metric::euclidean);

    CHECK_FALSE(authenticate(test, lib, d - 0.1, Metric::euclidean).accept);
    CHECK(authenticate(test, lib, d + 0.1, Metric::euclidean).accept);
}
