#include "microcsi/ofdm.hpp"

#include <cmath>
#include <numbers>

namespace microcsi {

OfdmGrid OfdmGrid::legacy20() {
    OfdmGrid g;
    g.n_fft = 64;
    g.sample_period = 50e-9;
    g.subcarriers.reserve(52);
    for (int k = -26; k <= 26; ++k) {
        if (k != 0) g.subcarriers.push_back(k);
    }
    return g;
}

TapSet tap_index_set(int n_p, int n_fft, int n_used) {
    if (n_p < 0) throw TapSetError("tap count parameter must be >= 0");
    if (2 * n_p + 1 > n_used) {
        throw TapSetError("tap set size " + std::to_string(2 * n_p + 1) +
                          " exceeds " + std::to_string(n_used) +
                          " usable subcarriers; solve would be underdetermined");
    }
    if (2 * n_p + 1 > n_fft) throw TapSetError("tap set larger than FFT");
    TapSet t;
    t.n_p = n_p;
    t.indices.reserve(2 * n_p + 1);
    for (int n = -n_p; n <= n_p; ++n) {
        t.indices.push_back(((n % n_fft) + n_fft) % n_fft);
    }
    return t;
}

PartialDft::PartialDft(OfdmGrid grid, TapSet taps)
    : grid_(std::move(grid)), taps_(std::move(taps)) {
    const int rows = grid_.n_used();
    const int cols = taps_.size();
    if (cols > rows) throw TapSetError("more taps than subcarriers");

    const double scale = 1.0 / std::sqrt(static_cast<double>(grid_.n_fft));
    f_.resize(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            // k*n reduced mod n_fft keeps the phase argument small; the
            // exponential is periodic so the value is unchanged.
            long kn = static_cast<long>(grid_.subcarriers[r]) * taps_.indices[c];
            long m = ((kn % grid_.n_fft) + grid_.n_fft) % grid_.n_fft;
            double ang = -2.0 * std::numbers::pi * static_cast<double>(m) /
                         static_cast<double>(grid_.n_fft);
            f_(r, c) = scale * cd(std::cos(ang), std::sin(ang));
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(f_);
    const auto& sv = svd.singularValues();
    double smin = sv(sv.size() - 1);
    double smax = sv(0);
    if (smin <= smax * 1e-12) {
        throw IllConditionedError("tap subspace is numerically rank deficient");
    }
    cond_ = smax / smin;

    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(f_);
    thin_q_ = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, cols);
    r_ = thin_q_.adjoint() * f_;
}

Eigen::VectorXcd PartialDft::solve_taps(const Eigen::VectorXcd& c) const {
    if (c.size() != f_.rows()) throw std::invalid_argument("vector/grid size mismatch");
    // R a = Q1^H c, with R = Q1^H F (upper triangular up to roundoff).
    Eigen::VectorXcd rhs = thin_q_.adjoint() * c;
    return r_.triangularView<Eigen::Upper>().solve(rhs);
}

Eigen::VectorXcd PartialDft::project(const Eigen::VectorXcd& c) const {
    if (c.size() != f_.rows()) throw std::invalid_argument("vector/grid size mismatch");
    return thin_q_ * (thin_q_.adjoint() * c);
}

PartialDft build_partial_dft(const OfdmGrid& grid, const TapSet& taps) {
    return PartialDft(grid, taps);
}

Eigen::MatrixXcd build_projector(const PartialDft& pd) {
    const Eigen::MatrixXcd& f = pd.matrix();
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(f);
    Eigen::MatrixXcd q1 =
        qr.householderQ() * Eigen::MatrixXcd::Identity(f.rows(), f.cols());
    return q1 * q1.adjoint();
}

} // namespace microcsi
