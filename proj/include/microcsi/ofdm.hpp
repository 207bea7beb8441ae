#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace microcsi {

using cd = std::complex<double>;

// 802.11-style OFDM grid: which FFT bins carry data, and the sample clock.
// Subcarrier indices are signed (negative = upper half of the FFT) and kept
// in ascending order.
struct OfdmGrid {
    int n_fft = 64;
    std::vector<int> subcarriers;
    double sample_period = 50e-9;

    // 20 MHz legacy grid: bins -26..-1 and 1..26, DC and guards excluded.
    static OfdmGrid legacy20();

    int n_used() const { return static_cast<int>(subcarriers.size()); }
};

struct TapSetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IllConditionedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Delay-domain support for the channel: taps -n_p..n_p reduced mod n_fft,
// stored in that order (so negative delays wrap to the top of the FFT).
struct TapSet {
    int n_p = 0;
    std::vector<int> indices;

    int size() const { return static_cast<int>(indices.size()); }
};

// Throws TapSetError when 2*n_p+1 exceeds the number of usable subcarriers
// (the least-squares problem would be underdetermined) or n_p < 0.
TapSet tap_index_set(int n_p, int n_fft, int n_used = 52);

// Partial unitary DFT F with rows = used subcarriers, columns = tap set:
// F(k,n) = exp(-j*2*pi*k*n/n_fft) / sqrt(n_fft).
// Holds a QR factorization so repeated projections and LS solves reuse it.
class PartialDft {
public:
    PartialDft(OfdmGrid grid, TapSet taps);

    const Eigen::MatrixXcd& matrix() const { return f_; }
    const OfdmGrid& grid() const { return grid_; }
    const TapSet& taps() const { return taps_; }

    // Least-squares tap solve min ||F a - c||_2 via the cached QR.
    Eigen::VectorXcd solve_taps(const Eigen::VectorXcd& c) const;

    // Orthogonal projection of c onto span(F) = F * solve_taps(c).
    Eigen::VectorXcd project(const Eigen::VectorXcd& c) const;

    // Ratio of extreme singular values of F.
    double condition_number() const { return cond_; }

private:
    OfdmGrid grid_;
    TapSet taps_;
    Eigen::MatrixXcd f_;
    Eigen::MatrixXcd thin_q_;
    Eigen::MatrixXcd r_;
    double cond_ = 0.0;
};

PartialDft build_partial_dft(const OfdmGrid& grid, const TapSet& taps);

// Dense Hermitian idempotent projector P = Q1 Q1^H onto span(F).
// Throws IllConditionedError when F is numerically rank deficient.
Eigen::MatrixXcd build_projector(const PartialDft& pd);

} // namespace microcsi
