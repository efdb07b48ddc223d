#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "mlab/core.hpp"

namespace mlab {

// splitmix64 (Vigna). Small, splittable, and easy to document: every random
// quantity in the library is derived from (seed, salt) through this generator,
// so reported seeds reproduce a run exactly.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1].
    double next_double_open() { return 1.0 - next_double(); }

    // Standard normal via Box-Muller.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_double_open();
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    Complex next_complex_gaussian() {
        const double re = next_gaussian();
        const double im = next_gaussian();
        return Complex(re, im);
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream for (seed, salt); salt 0 is the root stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    SplitMix64 mixer(seed ^ (0x9E3779B97F4A7C15ULL * (salt + 1)));
    return mixer.next();
}

inline CVector random_complex_gaussian_vector(Eigen::Index dim, SplitMix64& rng) {
    CVector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.next_complex_gaussian();
    return v;
}

// Haar-random pure state: normalized complex-Gaussian entries.
inline CVector random_unit_vector(Eigen::Index dim, SplitMix64& rng) {
    CVector v = random_complex_gaussian_vector(dim, rng);
    double norm = v.norm();
    while (norm == 0.0) {  // essentially impossible, but keeps the contract total
        v = random_complex_gaussian_vector(dim, rng);
        norm = v.norm();
    }
    return v / norm;
}

// Haar-random unitary: QR of a complex-Gaussian matrix with the R-diagonal
// phase fix that makes the distribution uniform.
inline CMatrix haar_unitary(Eigen::Index dim, SplitMix64& rng) {
    CMatrix g(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = rng.next_complex_gaussian();
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ();
    const CMatrix r = qr.matrixQR().template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < dim; ++j) {
        const Complex d = r(j, j);
        const double mag = std::abs(d);
        if (mag > 0.0) q.col(j) *= d / mag;
    }
    return q;
}

}  // namespace mlab
