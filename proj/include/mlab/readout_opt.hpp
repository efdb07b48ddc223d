#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlab/analysis.hpp"
#include "mlab/core.hpp"
#include "mlab/errors.hpp"
#include "mlab/interaction.hpp"
#include "mlab/rng.hpp"
#include "mlab/tolerances.hpp"

namespace mlab {

// Entrywise-nonnegative factor F (outcomes x branches) with F^T F ~ Re(G).
// F[m][a] is the target readout amplitude <m_r|phi(a)>.
struct NonnegFactorization {
    RMatrix f;
    double residual = 0.0;  // Frobenius norm of F^T F - Re(G)
    Eigen::Index outcomes = 0;
    std::uint64_t seed = 0;
    long iterations = 0;  // total projected-gradient iterations across restarts
};

namespace detail {

inline double factorization_residual(const RMatrix& f, const RMatrix& g) {
    return (f.transpose() * f - g).norm();
}

// Projected gradient descent on ||F^T F - G||_F^2 over F >= 0 with a
// backtracking line search. Runs until the active-set gradient norm drops
// below 1e-10, the iteration cap is hit, or the residual target is met.
inline RMatrix nonneg_factor_descent(const RMatrix& g, RMatrix f, double target_residual,
                                     long max_iterations, long& iterations_used) {
    const double armijo = 1e-4;
    double step = 1.0;
    RMatrix e = f.transpose() * f - g;
    double obj = e.squaredNorm();
    for (long it = 0; it < max_iterations; ++it) {
        ++iterations_used;
        if (std::sqrt(obj) <= target_residual) break;
        const RMatrix grad = 4.0 * (f * e);
        // gradient restricted to the feasible directions at the boundary
        double grad_norm_sq = 0.0;
        for (Eigen::Index i = 0; i < f.rows(); ++i) {
            for (Eigen::Index j = 0; j < f.cols(); ++j) {
                if (f(i, j) > 0.0 || grad(i, j) < 0.0) {
                    grad_norm_sq += grad(i, j) * grad(i, j);
                }
            }
        }
        if (std::sqrt(grad_norm_sq) < 1e-10) break;

        step *= 2.0;  // allow recovery after conservative steps
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            const RMatrix trial = (f - step * grad).cwiseMax(0.0);
            const RMatrix trial_e = trial.transpose() * trial - g;
            const double trial_obj = trial_e.squaredNorm();
            const double decrease = (grad.array() * (f - trial).array()).sum();
            if (trial_obj <= obj - armijo * decrease) {
                f = trial;
                e = trial_e;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflow, no further progress possible
    }
    return f;
}

inline RMatrix random_nonneg_init(Eigen::Index outcomes, Eigen::Index n, SplitMix64& rng) {
    RMatrix f(outcomes, n);
    for (Eigen::Index i = 0; i < outcomes; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) f(i, j) = rng.next_double();
    }
    // scale so diag(F^T F) = 1, matching the unit diagonal of the Gram matrix
    for (Eigen::Index j = 0; j < n; ++j) {
        const double norm = f.col(j).norm();
        if (norm > 0.0) f.col(j) /= norm;
    }
    return f;
}

}  // namespace detail

/// Searches for an entrywise-nonnegative F with F^T F = Re(G) by multi-start
/// projected gradient descent. Fails fast when G itself is not real and
/// nonnegative (the necessary condition), and reports the best residual when
/// no restart reaches `tol` (which may simply mean more outcomes are needed;
/// it is not a proof of infeasibility).
inline NonnegFactorization cp_factorize(const GramMatrix& g, Eigen::Index max_outcomes = 0,
                                        int restarts = 32,
                                        double tol = default_tolerances().optimization,
                                        std::uint64_t seed = 0x6d6c6162ULL) {
    const Eigen::Index n = g.dim();
    const double imag_residue = g.matrix().imag().cwiseAbs().maxCoeff();
    if (imag_residue > 1e-10) {
        throw GramNotNonnegative("cp_factorize: Gram entry has imaginary part " +
                                 detail::fmt(imag_residue) +
                                 "; a resolution at the decoherence limit requires real "
                                 "nonnegative inner products");
    }
    const double min_entry = g.matrix().real().minCoeff();
    if (min_entry < -1e-10) {
        throw GramNotNonnegative("cp_factorize: Gram entry " + detail::fmt(min_entry) +
                                 " is negative");
    }
    const RMatrix target = g.matrix().real().cwiseMax(0.0);
    const Eigen::Index outcomes = max_outcomes > 0 ? max_outcomes : n * (n + 1) / 2;
    if (restarts < 1) throw ValidationError("cp_factorize: restarts must be >= 1");

    NonnegFactorization best;
    best.outcomes = outcomes;
    best.seed = seed;
    best.residual = std::numeric_limits<double>::infinity();
    long iterations = 0;
    for (int r = 0; r < restarts; ++r) {
        SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
        RMatrix f0 = detail::random_nonneg_init(outcomes, n, rng);
        const RMatrix f = detail::nonneg_factor_descent(target, std::move(f0), 0.25 * tol,
                                                        100000, iterations);
        const double residual = detail::factorization_residual(f, target);
        if (residual < best.residual) {
            best.f = f;
            best.residual = residual;
        }
        if (best.residual <= 0.25 * tol) break;
    }
    best.iterations = iterations;
    if (best.residual > tol) {
        throw FactorizationNotFound("cp_factorize: best residual " +
                                    detail::fmt(best.residual) + " above tolerance " +
                                    detail::fmt(tol) + " after " + std::to_string(restarts) +
                                    " restarts with " + std::to_string(outcomes) + " outcomes");
    }
    return best;
}

/// Turns a successful factorization into an actual readout: an isometry W from
/// the meter into the outcome space with <m|W|phi(a)> = F[m][a]. The linear
/// system is solved on the span of the conditional states and W is extended
/// isometrically on the orthogonal complement.
inline ReadoutStrategy optimal_readout(const MeasurementInteraction& mi,
                                       const NonnegFactorization& fact,
                                       std::string name = "optimal",
                                       double tol = default_tolerances().optimization) {
    const Eigen::Index n = mi.branches();
    const Eigen::Index d = mi.meter_dim();
    if (fact.f.cols() != n) {
        throw DimensionError("optimal_readout: factorization covers " +
                             std::to_string(fact.f.cols()) + " branches, interaction has " +
                             std::to_string(n));
    }
    if (fact.residual > tol) {
        throw InconsistentFactorization("optimal_readout: residual " +
                                        detail::fmt(fact.residual) + " above tolerance " +
                                        detail::fmt(tol));
    }

    const CMatrix states = mi.state_matrix();  // d x n
    Eigen::JacobiSVD<CMatrix> svd(states, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma_max = svd.singularValues().maxCoeff();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()[i] > 1e-10 * sigma_max) ++rank;
    }
    if (fact.f.rows() < rank) {
        throw InconsistentFactorization("optimal_readout: " + std::to_string(fact.f.rows()) +
                                        " outcomes cannot span the rank-" + std::to_string(rank) +
                                        " conditional-state space");
    }
    const CMatrix span_basis = svd.matrixU().leftCols(rank);   // d x r
    const CMatrix coords = span_basis.adjoint() * states;      // r x n

    const Eigen::Index m_eff = std::max<Eigen::Index>(fact.f.rows(), d);
    CMatrix f_pad = CMatrix::Zero(m_eff, n);
    f_pad.topRows(fact.f.rows()) = fact.f.cast<Complex>();

    // V = F pinv(C) maps span coordinates to outcome amplitudes
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(coords.adjoint());  // n x r
    const CMatrix v_raw = cod.solve(f_pad.adjoint()).adjoint();             // m_eff x r

    // polar correction: the factorization residual leaves V only approximately
    // isometric
    const CMatrix vv = v_raw.adjoint() * v_raw;
    const HermitianEig eig = hermitian_eig(vv, 1e-3);
    if (eig.eigenvalues.minCoeff() < 0.5) {
        throw InconsistentFactorization(
            "optimal_readout: factor columns are too far from an isometric image "
            "(smallest Gram eigenvalue " + detail::fmt(eig.eigenvalues.minCoeff()) + ")");
    }
    CMatrix inv_sqrt = CMatrix::Zero(rank, rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
        inv_sqrt += eig.eigenvectors.col(i) * eig.eigenvectors.col(i).adjoint() /
                    std::sqrt(eig.eigenvalues[i]);
    }
    const CMatrix v = v_raw * inv_sqrt;

    const double reproduce_dev = (v * coords - f_pad).cwiseAbs().maxCoeff();
    if (reproduce_dev > std::max(1e-6, 100.0 * fact.residual)) {
        throw InconsistentFactorization("optimal_readout: no isometry reproduces F; max "
                                        "amplitude deviation " + detail::fmt(reproduce_dev));
    }

    CMatrix embed;
    if (rank == d) {
        embed = v * span_basis.adjoint();
    } else {
        // complete the span basis in the meter and the image basis in the
        // outcome space, then map complement onto complement
        Eigen::HouseholderQR<CMatrix> meter_qr(span_basis);
        const CMatrix meter_full = meter_qr.householderQ();
        const CMatrix meter_perp = meter_full.rightCols(d - rank);

        Eigen::HouseholderQR<CMatrix> out_qr(v);
        const CMatrix out_full = out_qr.householderQ();
        const CMatrix out_perp = out_full.rightCols(m_eff - rank).leftCols(d - rank);

        embed = v * span_basis.adjoint() + out_perp * meter_perp.adjoint();
    }
    return ReadoutStrategy(std::move(embed), std::move(name));
}

namespace detail {

// Hermitian combination sum_a alpha_a (U_a + U_a^dagger) + beta_a i(U_a^dagger - U_a)
// with generic weights; commuting normal matrices share its eigenbasis.
inline CMatrix generic_hermitian_combo(const std::vector<CMatrix>& us, SplitMix64& rng) {
    const Eigen::Index d = us.front().rows();
    CMatrix h = CMatrix::Zero(d, d);
    for (const CMatrix& u : us) {
        const double alpha = rng.next_double() + 0.5;
        const double beta = rng.next_double() + 0.5;
        h += alpha * (u + u.adjoint());
        h += beta * Complex(0.0, 1.0) * (u.adjoint() - u);
    }
    return h;
}

// Refines `basis` so every column block on which some U acts non-scalar gets
// re-diagonalized with fresh weights. Commuting unitaries need at most a few
// passes.
inline CMatrix joint_eigenbasis(const std::vector<CMatrix>& us, std::uint64_t seed, double tol) {
    const Eigen::Index d = us.front().rows();
    CMatrix basis = CMatrix::Identity(d, d);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks{{0, d}};
    for (int pass = 0; pass < 8 && !blocks.empty(); ++pass) {
        SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(pass)));
        const CMatrix h = generic_hermitian_combo(us, rng);
        std::vector<std::pair<Eigen::Index, Eigen::Index>> next;
        for (const auto& [lo, hi] : blocks) {
            const Eigen::Index k = hi - lo;
            if (k == 1) continue;
            const CMatrix sub = basis.middleCols(lo, k);
            const CMatrix h_sub = sub.adjoint() * h * sub;
            const HermitianEig eig = hermitian_eig(h_sub, 1e-8 * std::max(1.0, h.norm()));
            basis.middleCols(lo, k) = sub * eig.eigenvectors;
            // split into eigenvalue clusters
            const double gap_tol = 1e-7 * std::max(1.0, h.norm());
            Eigen::Index start = 0;
            for (Eigen::Index i = 1; i <= k; ++i) {
                if (i == k || eig.eigenvalues[i] - eig.eigenvalues[i - 1] > gap_tol) {
                    if (i - start > 1) {
                        // keep the cluster only if some U still acts non-scalar on it
                        const CMatrix cluster = basis.middleCols(lo + start, i - start);
                        bool scalar = true;
                        for (const CMatrix& u : us) {
                            const CMatrix b = cluster.adjoint() * u * cluster;
                            const Complex mean = b.trace() / static_cast<double>(i - start);
                            const double dev =
                                (b - mean * CMatrix::Identity(i - start, i - start))
                                    .cwiseAbs()
                                    .maxCoeff();
                            if (dev > tol) {
                                scalar = false;
                                break;
                            }
                        }
                        if (!scalar) next.emplace_back(lo + start, lo + i);
                    }
                    start = i;
                }
            }
        }
        blocks = std::move(next);
    }
    if (!blocks.empty()) {
        throw NoEraserFound("eraser_readout: joint diagonalization did not converge (residual "
                            "degenerate block)");
    }
    return basis;
}

}  // namespace detail

/// Synthesizes a readout whose outcome probabilities carry no information on
/// the target observable, so resolution and irreversible decoherence both
/// vanish. Works when the conditional meter unitaries commute (their joint
/// eigenbasis conserves the outcome distribution); otherwise NoEraserFound.
inline ReadoutStrategy eraser_readout(const MeasurementInteraction& mi,
                                      double tol = default_tolerances().validity,
                                      std::uint64_t seed = 0x65726173ULL) {
    if (!mi.conditional_unitaries()) {
        throw NoEraserFound("eraser_readout: interaction does not expose conditional meter "
                            "unitaries, no construction is available");
    }
    const std::vector<CMatrix>& us = *mi.conditional_unitaries();
    for (std::size_t i = 0; i < us.size(); ++i) {
        for (std::size_t j = i + 1; j < us.size(); ++j) {
            const double comm = (us[i] * us[j] - us[j] * us[i]).cwiseAbs().maxCoeff();
            if (comm > tol) {
                throw NoEraserFound("eraser_readout: conditional unitaries " +
                                    std::to_string(i) + " and " + std::to_string(j) +
                                    " do not commute (max commutator entry " +
                                    detail::fmt(comm) + ")");
            }
        }
    }
    const CMatrix basis = detail::joint_eigenbasis(us, seed, tol);
    ReadoutStrategy readout = ReadoutStrategy::from_basis(basis, "eraser");

    // the gate that defines an eraser: P(m|a) independent of a
    const CondProbTable table = cond_probs(mi, readout);
    for (Eigen::Index m = 0; m < table.outcomes(); ++m) {
        const double dev = table.p.row(m).maxCoeff() - table.p.row(m).minCoeff();
        if (dev > tol) {
            throw NoEraserFound("eraser_readout: outcome " + std::to_string(m) +
                                " retains dependence on the eigenstate (spread " +
                                detail::fmt(dev) + ")");
        }
    }
    return readout;
}

// Outcome-conditioned phase correction: diagonal unitaries on the system that
// undo the phases imprinted by an eraser readout.
class FeedbackCorrection {
public:
    explicit FeedbackCorrection(std::vector<CVector> diagonals)
        : diagonals_(std::move(diagonals)) {
        for (const CVector& diag : diagonals_) {
            for (Eigen::Index i = 0; i < diag.size(); ++i) {
                if (std::abs(std::abs(diag[i]) - 1.0) > 1e-12) {
                    throw ValidationError("FeedbackCorrection: diagonal entry modulus " +
                                          detail::fmt(std::abs(diag[i])) + " deviates from 1");
                }
            }
        }
    }

    Eigen::Index outcomes() const { return static_cast<Eigen::Index>(diagonals_.size()); }
    const CVector& diagonal(Eigen::Index m) const {
        return diagonals_.at(static_cast<std::size_t>(m));
    }

    /// U_fb(m) rho U_fb(m)^dagger.
    DensityMatrix apply(Eigen::Index m, const DensityMatrix& rho,
                        double tol = default_tolerances().validity) const {
        const CVector& diag = diagonal(m);
        if (diag.size() != rho.dim()) {
            throw DimensionError("FeedbackCorrection: correction dim " +
                                 std::to_string(diag.size()) + " vs state dim " +
                                 std::to_string(rho.dim()));
        }
        CMatrix out(rho.dim(), rho.dim());
        for (Eigen::Index i = 0; i < rho.dim(); ++i) {
            for (Eigen::Index j = 0; j < rho.dim(); ++j) {
                out(i, j) = diag[i] * rho.matrix()(i, j) * std::conj(diag[j]);
            }
        }
        return validate_density(out, tol, rho.labels());
    }

private:
    std::vector<CVector> diagonals_;
};

/// For an eraser readout, builds U_fb(m) = diag(exp(-i arg<m|W|phi(a)>));
/// applying it to the conditional state restores the input exactly.
inline FeedbackCorrection feedback_correction(const MeasurementInteraction& mi,
                                              const ReadoutStrategy& r,
                                              double tol = default_tolerances().validity) {
    const CMatrix amp = outcome_amplitudes(mi, r);
    const RMatrix probs = amp.cwiseAbs2();
    for (Eigen::Index m = 0; m < probs.rows(); ++m) {
        const double dev = probs.row(m).maxCoeff() - probs.row(m).minCoeff();
        if (dev > tol) {
            throw NotEraser("feedback_correction: outcome " + std::to_string(m) +
                            " has eigenstate-dependent probability (spread " +
                            detail::fmt(dev) + "), readout '" + r.name() +
                            "' is not an eraser");
        }
    }
    std::vector<CVector> diagonals;
    diagonals.reserve(static_cast<std::size_t>(amp.rows()));
    for (Eigen::Index m = 0; m < amp.rows(); ++m) {
        CVector diag(amp.cols());
        const bool dead = probs.row(m).maxCoeff() <= detail::kProbFloor;
        for (Eigen::Index a = 0; a < amp.cols(); ++a) {
            diag[a] = dead ? Complex(1.0, 0.0)
                           : std::exp(Complex(0.0, -std::arg(amp(m, a))));
        }
        diagonals.push_back(std::move(diag));
    }
    return FeedbackCorrection(std::move(diagonals));
}

}  // namespace mlab
