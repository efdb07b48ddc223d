#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlab/core.hpp"
#include "mlab/errors.hpp"
#include "mlab/tolerances.hpp"

namespace mlab {

// Stage-I description of a measurement: eigenvalue labels of the target
// observable plus one conditional meter state per label. Conditional states
// are indexed by position; the numeric labels matter only for Hamiltonian
// constructions and display. When the construction also yields the conditional
// meter unitaries they are kept, since eraser synthesis needs them.
class MeasurementInteraction {
public:
    static MeasurementInteraction from_states(std::vector<double> a_labels,
                                              std::vector<CVector> phi,
                                              bool allow_degenerate = false,
                                              double tol = default_tolerances().validity) {
        return MeasurementInteraction(std::move(a_labels), std::move(phi), std::nullopt,
                                      allow_degenerate, tol);
    }

    Eigen::Index branches() const { return static_cast<Eigen::Index>(phi_.size()); }
    Eigen::Index meter_dim() const { return phi_.front().size(); }
    const std::vector<double>& labels() const { return a_labels_; }
    const std::vector<CVector>& states() const { return phi_; }
    const CVector& state(Eigen::Index a) const { return phi_.at(static_cast<std::size_t>(a)); }

    // Conditional meter unitaries, when the construction provides them.
    const std::optional<std::vector<CMatrix>>& conditional_unitaries() const {
        return unitaries_;
    }

    // Conditional states stacked as columns of a meter_dim x branches matrix.
    CMatrix state_matrix() const {
        CMatrix m(meter_dim(), branches());
        for (Eigen::Index a = 0; a < branches(); ++a) m.col(a) = phi_[a];
        return m;
    }

    friend MeasurementInteraction from_conditional_unitaries(const std::vector<UnitaryMatrix>&,
                                                             const CVector&, std::vector<double>,
                                                             bool, double);
    friend MeasurementInteraction from_product_hamiltonian(const struct ProductHamiltonianSpec&,
                                                           bool, double);
    friend MeasurementInteraction from_two_part_meter(const struct TwoPartMeterSpec&, bool,
                                                      double);

private:
    MeasurementInteraction(std::vector<double> a_labels, std::vector<CVector> phi,
                           std::optional<std::vector<CMatrix>> unitaries, bool allow_degenerate,
                           double tol)
        : a_labels_(std::move(a_labels)), phi_(std::move(phi)), unitaries_(std::move(unitaries)) {
        if (phi_.size() < 2) {
            throw DimensionError("MeasurementInteraction: needs n >= 2 conditional states, got " +
                                 std::to_string(phi_.size()));
        }
        if (a_labels_.size() != phi_.size()) {
            throw DimensionError("MeasurementInteraction: " + std::to_string(a_labels_.size()) +
                                 " labels for " + std::to_string(phi_.size()) + " states");
        }
        const Eigen::Index d = phi_.front().size();
        if (d < 1) throw DimensionError("MeasurementInteraction: meter dim must be >= 1");
        for (std::size_t i = 0; i < phi_.size(); ++i) {
            if (phi_[i].size() != d) {
                throw DimensionError("MeasurementInteraction: state " + std::to_string(i) +
                                     " has dim " + std::to_string(phi_[i].size()) +
                                     ", expected " + std::to_string(d));
            }
            const double norm_dev = std::abs(phi_[i].norm() - 1.0);
            if (norm_dev > tol) {
                throw NotNormalized("MeasurementInteraction: |phi(" + std::to_string(i) +
                                    ")| deviates from 1 by " + detail::fmt(norm_dev));
            }
        }
        if (!allow_degenerate) {
            for (std::size_t i = 0; i < a_labels_.size(); ++i) {
                for (std::size_t j = i + 1; j < a_labels_.size(); ++j) {
                    if (a_labels_[i] == a_labels_[j]) {
                        throw ValidationError(
                            "MeasurementInteraction: duplicate eigenvalue label " +
                            detail::fmt(a_labels_[i]) +
                            " (pass allow_degenerate to keep it anyway)");
                    }
                }
            }
        }
    }

    std::vector<double> a_labels_;
    std::vector<CVector> phi_;
    std::optional<std::vector<CMatrix>> unitaries_;
};

// Hermitian matrix of inner products g[i][j] = <phi(a_i)|phi(a_j)>. Determines
// the decoherence matrix and every readout limit.
class GramMatrix {
public:
    explicit GramMatrix(CMatrix g, double tol = default_tolerances().validity)
        : g_(std::move(g)) {
        if (g_.rows() != g_.cols() || g_.rows() < 1) {
            throw DimensionError("GramMatrix: matrix is " + std::to_string(g_.rows()) + "x" +
                                 std::to_string(g_.cols()) + ", expected square");
        }
        const double herm_dev = detail::hermiticity_deviation(g_);
        if (herm_dev > tol) {
            throw NotHermitian("GramMatrix: max |g - g^dagger| = " + detail::fmt(herm_dev));
        }
        for (Eigen::Index i = 0; i < g_.rows(); ++i) {
            if (std::abs(g_(i, i) - Complex(1.0, 0.0)) > tol) {
                throw ValidationError("GramMatrix: diagonal entry " + std::to_string(i) +
                                      " deviates from 1 by " +
                                      detail::fmt(std::abs(g_(i, i) - Complex(1.0, 0.0))));
            }
        }
        const double max_abs = g_.cwiseAbs().maxCoeff();
        if (max_abs > 1.0 + tol) {
            throw ValidationError("GramMatrix: entry modulus " + detail::fmt(max_abs) +
                                  " exceeds 1");
        }
        const HermitianEig eig = hermitian_eig(0.5 * (g_ + g_.adjoint().eval()), tol);
        if (eig.eigenvalues.minCoeff() < -tol) {
            throw NotPositive("GramMatrix: minimum eigenvalue " +
                              detail::fmt(eig.eigenvalues.minCoeff()) + " is below -" +
                              detail::fmt(tol));
        }
    }

    const CMatrix& matrix() const { return g_; }
    Eigen::Index dim() const { return g_.rows(); }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return g_(i, j); }

private:
    CMatrix g_;
};

/// g[i][j] = <phi(a_i)|phi(a_j)>.
inline GramMatrix gram(const MeasurementInteraction& mi,
                       double tol = default_tolerances().validity) {
    const Eigen::Index n = mi.branches();
    CMatrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = inner(mi.state(i), mi.state(j));
    }
    return GramMatrix(std::move(g), tol);
}

// Interaction Hamiltonian of product form: the conditional meter state for
// eigenvalue A_a picks up the phase exp(-i A_a B_b t) on each meter eigenstate
// |b>. `effective_time` absorbs t/hbar, so phases are A_a * B_b * effective_time.
struct ProductHamiltonianSpec {
    std::vector<double> a_values;
    std::vector<double> b_values;
    CVector initial_meter;  // |Phi_0> in the B eigenbasis
    double effective_time = 0.0;

    void validate(double tol = default_tolerances().validity) const {
        if (a_values.size() < 2) {
            throw ValidationError("ProductHamiltonianSpec: needs >= 2 eigenvalues of the target "
                                  "observable");
        }
        if (b_values.empty()) {
            throw ValidationError("ProductHamiltonianSpec: needs >= 1 meter eigenvalue");
        }
        if (initial_meter.size() != static_cast<Eigen::Index>(b_values.size())) {
            throw DimensionError("ProductHamiltonianSpec: initial meter has dim " +
                                 std::to_string(initial_meter.size()) + ", expected " +
                                 std::to_string(b_values.size()));
        }
        const double norm_dev = std::abs(initial_meter.norm() - 1.0);
        if (norm_dev > tol) {
            throw NotNormalized("ProductHamiltonianSpec: |Phi_0| deviates from 1 by " +
                                detail::fmt(norm_dev));
        }
    }
};

// Two-part meter with opposite-sign couplings. Both parts share the meter
// eigenvalues V_v and the outcome distribution |<v|Phi>|^2, which makes every
// Gram entry real and nonnegative by construction.
struct TwoPartMeterSpec {
    std::vector<double> a_values;
    std::vector<double> v_values;
    std::vector<double> dist;  // |<v|Phi_P1>|^2 = |<v|Phi_P2>|^2
    double effective_time = 0.0;

    void validate() const {
        if (a_values.size() < 2) {
            throw ValidationError("TwoPartMeterSpec: needs >= 2 eigenvalues of the target "
                                  "observable");
        }
        if (v_values.empty() || v_values.size() != dist.size()) {
            throw DimensionError("TwoPartMeterSpec: " + std::to_string(dist.size()) +
                                 " probabilities for " + std::to_string(v_values.size()) +
                                 " meter eigenvalues");
        }
        double sum = 0.0;
        for (double p : dist) {
            if (p < 0.0) {
                throw ValidationError("TwoPartMeterSpec: negative probability " +
                                      detail::fmt(p));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ValidationError("TwoPartMeterSpec: probabilities sum to " + detail::fmt(sum) +
                                  ", expected 1 within 1e-12");
        }
    }
};

/// phi(a_i) = U_M(a_i) |Phi_0>.
inline MeasurementInteraction from_conditional_unitaries(
    const std::vector<UnitaryMatrix>& unitaries, const CVector& initial_meter,
    std::vector<double> a_labels, bool allow_degenerate = false,
    double tol = default_tolerances().validity) {
    if (unitaries.empty()) {
        throw DimensionError("from_conditional_unitaries: empty unitary list");
    }
    const Eigen::Index d = initial_meter.size();
    if (std::abs(initial_meter.norm() - 1.0) > tol) {
        throw NotNormalized("from_conditional_unitaries: |Phi_0| deviates from 1 by " +
                            detail::fmt(std::abs(initial_meter.norm() - 1.0)));
    }
    std::vector<CVector> phi;
    std::vector<CMatrix> us;
    phi.reserve(unitaries.size());
    us.reserve(unitaries.size());
    for (const UnitaryMatrix& u : unitaries) {
        if (u.dim() != d) {
            throw DimensionError("from_conditional_unitaries: unitary dim " +
                                 std::to_string(u.dim()) + " does not match meter dim " +
                                 std::to_string(d));
        }
        phi.push_back(u.matrix() * initial_meter);
        us.push_back(u.matrix());
    }
    return MeasurementInteraction(std::move(a_labels), std::move(phi), std::move(us),
                                  allow_degenerate, tol);
}

/// phi(a)[b] = exp(-i A_a B_b t) <b|Phi_0>.
inline MeasurementInteraction from_product_hamiltonian(
    const ProductHamiltonianSpec& spec, bool allow_degenerate = false,
    double tol = default_tolerances().validity) {
    spec.validate(tol);
    const Eigen::Index d = spec.initial_meter.size();
    const Eigen::Index n = static_cast<Eigen::Index>(spec.a_values.size());
    std::vector<CVector> phi;
    std::vector<CMatrix> us;
    phi.reserve(n);
    us.reserve(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        CVector v(d);
        CMatrix u = CMatrix::Zero(d, d);
        for (Eigen::Index b = 0; b < d; ++b) {
            const Complex phase =
                std::exp(Complex(0.0, -spec.a_values[a] * spec.b_values[b] * spec.effective_time));
            v[b] = phase * spec.initial_meter[b];
            u(b, b) = phase;
        }
        phi.push_back(std::move(v));
        us.push_back(std::move(u));
    }
    return MeasurementInteraction(spec.a_values, std::move(phi), std::move(us), allow_degenerate,
                                  tol);
}

/// phi(a) = phi_P1(a) (x) phi_P2(a), the two factors carrying opposite phases.
inline MeasurementInteraction from_two_part_meter(const TwoPartMeterSpec& spec,
                                                  bool allow_degenerate = false,
                                                  double tol = default_tolerances().validity) {
    spec.validate();
    const Eigen::Index k = static_cast<Eigen::Index>(spec.v_values.size());
    const Eigen::Index n = static_cast<Eigen::Index>(spec.a_values.size());
    RVector amp(k);
    for (Eigen::Index v = 0; v < k; ++v) amp[v] = std::sqrt(spec.dist[v]);
    std::vector<CVector> phi;
    std::vector<CMatrix> us;
    phi.reserve(n);
    us.reserve(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        CVector p1(k), p2(k);
        for (Eigen::Index v = 0; v < k; ++v) {
            const double angle = spec.a_values[a] * spec.v_values[v] * spec.effective_time;
            p1[v] = std::exp(Complex(0.0, -angle)) * amp[v];
            p2[v] = std::exp(Complex(0.0, +angle)) * amp[v];
        }
        CVector full(k * k);
        CMatrix u = CMatrix::Zero(k * k, k * k);
        for (Eigen::Index v1 = 0; v1 < k; ++v1) {
            for (Eigen::Index v2 = 0; v2 < k; ++v2) {
                const Eigen::Index idx = v1 * k + v2;
                full[idx] = p1[v1] * p2[v2];
                const double angle =
                    spec.a_values[a] * (spec.v_values[v1] - spec.v_values[v2]) *
                    spec.effective_time;
                u(idx, idx) = std::exp(Complex(0.0, -angle));
            }
        }
        const double norm = full.norm();
        if (norm > 0.0) full /= norm;  // removes accumulated rounding in the product
        phi.push_back(std::move(full));
        us.push_back(std::move(u));
    }
    return MeasurementInteraction(spec.a_values, std::move(phi), std::move(us), allow_degenerate,
                                  tol);
}

}  // namespace mlab
