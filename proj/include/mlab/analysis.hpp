#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlab/core.hpp"
#include "mlab/errors.hpp"
#include "mlab/interaction.hpp"
#include "mlab/tolerances.hpp"

namespace mlab {

// A readout strategy: an isometric embedding W of the meter into an
// M-dimensional outcome space whose rows are the outcome bras <m|W. A plain
// orthonormal basis readout is W = B^dagger with the basis kets as columns
// of B; M > d models lossless transfer into a larger Hilbert space.
class ReadoutStrategy {
public:
    ReadoutStrategy(CMatrix embed, std::string name,
                    double tol = default_tolerances().validity)
        : embed_(std::move(embed)), name_(std::move(name)) {
        if (embed_.rows() < 1 || embed_.cols() < 1) {
            throw DimensionError("ReadoutStrategy: empty embedding");
        }
        if (embed_.rows() < embed_.cols()) {
            throw DimensionError("ReadoutStrategy: " + std::to_string(embed_.rows()) +
                                 " outcomes cannot isometrically cover a " +
                                 std::to_string(embed_.cols()) + "-dim meter");
        }
        const CMatrix gram = embed_.adjoint() * embed_;
        const double dev =
            (gram - CMatrix::Identity(embed_.cols(), embed_.cols())).cwiseAbs().maxCoeff();
        if (dev > tol) {
            throw NotUnitary("ReadoutStrategy: max |W^dagger W - I| = " + detail::fmt(dev) +
                             " exceeds tolerance " + detail::fmt(tol));
        }
    }

    static ReadoutStrategy computational(Eigen::Index dim, std::string name = "computational") {
        return ReadoutStrategy(CMatrix::Identity(dim, dim), std::move(name));
    }

    // Readout in the orthonormal basis given by the columns of `basis_kets`.
    static ReadoutStrategy from_basis(const CMatrix& basis_kets, std::string name,
                                      double tol = default_tolerances().validity) {
        return ReadoutStrategy(basis_kets.adjoint(), std::move(name), tol);
    }

    const CMatrix& embed() const { return embed_; }
    Eigen::Index outcomes() const { return embed_.rows(); }
    Eigen::Index meter_dim() const { return embed_.cols(); }
    const std::string& name() const { return name_; }

private:
    CMatrix embed_;
    std::string name_;
};

/// Outcome amplitudes <m|W|phi(a)> stacked as an outcomes x branches matrix.
inline CMatrix outcome_amplitudes(const MeasurementInteraction& mi, const ReadoutStrategy& r) {
    if (r.meter_dim() != mi.meter_dim()) {
        throw DimensionError("outcome_amplitudes: readout acts on a " +
                             std::to_string(r.meter_dim()) + "-dim meter, interaction has " +
                             std::to_string(mi.meter_dim()));
    }
    return r.embed() * mi.state_matrix();
}

// Table of conditional probabilities P(m|a); each column is the outcome
// distribution of one eigenstate.
struct CondProbTable {
    RMatrix p;  // outcomes x branches
    std::vector<double> a_labels;

    Eigen::Index outcomes() const { return p.rows(); }
    Eigen::Index branches() const { return p.cols(); }

    void validate(double tol = default_tolerances().validity) const {
        for (Eigen::Index m = 0; m < p.rows(); ++m) {
            for (Eigen::Index a = 0; a < p.cols(); ++a) {
                if (p(m, a) < 0.0 || p(m, a) > 1.0) {
                    throw ValidationError("CondProbTable: entry (" + std::to_string(m) + "," +
                                          std::to_string(a) + ") = " + detail::fmt(p(m, a)) +
                                          " outside [0,1]");
                }
            }
        }
        for (Eigen::Index a = 0; a < p.cols(); ++a) {
            const double sum = p.col(a).sum();
            if (std::abs(sum - 1.0) > tol) {
                throw ValidationError("CondProbTable: column " + std::to_string(a) +
                                      " sums to " + detail::fmt(sum));
            }
        }
    }
};

enum class PairKind { Resolution, Decoherence, IrreversibleDecoherence };

inline const char* to_string(PairKind kind) {
    switch (kind) {
        case PairKind::Resolution: return "resolution";
        case PairKind::Decoherence: return "decoherence";
        case PairKind::IrreversibleDecoherence: return "irreversible_decoherence";
    }
    return "unknown";
}

// Symmetric matrix over eigenstate pairs with zero diagonal, entries in [0,1].
// Entries may be undefined (state-based irreversible decoherence where the
// input coherence vanishes); reading one throws UndefinedEntry.
class PairMatrix {
public:
    using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    PairMatrix(PairKind kind, RMatrix values, std::vector<double> labels = {},
               std::optional<Mask> defined = std::nullopt,
               double tol = default_tolerances().validity)
        : kind_(kind), v_(std::move(values)), labels_(std::move(labels)) {
        if (v_.rows() != v_.cols() || v_.rows() < 1) {
            throw DimensionError("PairMatrix: matrix is " + std::to_string(v_.rows()) + "x" +
                                 std::to_string(v_.cols()) + ", expected square");
        }
        defined_ = defined.value_or(Mask::Constant(v_.rows(), v_.cols(), true));
        if (defined_.rows() != v_.rows() || defined_.cols() != v_.cols()) {
            throw DimensionError("PairMatrix: mask shape mismatch");
        }
        for (Eigen::Index i = 0; i < v_.rows(); ++i) {
            v_(i, i) = 0.0;
            for (Eigen::Index j = 0; j < v_.cols(); ++j) {
                if (defined_(i, j) != defined_(j, i) ||
                    (defined_(i, j) && std::abs(v_(i, j) - v_(j, i)) > tol)) {
                    throw ValidationError("PairMatrix: not symmetric at (" + std::to_string(i) +
                                          "," + std::to_string(j) + ")");
                }
                if (!defined_(i, j)) continue;
                if (v_(i, j) < -tol || v_(i, j) > 1.0 + tol) {
                    throw ValidationError("PairMatrix: entry (" + std::to_string(i) + "," +
                                          std::to_string(j) + ") = " + detail::fmt(v_(i, j)) +
                                          " outside [0,1]");
                }
                v_(i, j) = std::min(1.0, std::max(0.0, v_(i, j)));
            }
        }
    }

    PairKind kind() const { return kind_; }
    Eigen::Index dim() const { return v_.rows(); }
    const RMatrix& values() const { return v_; }
    const std::vector<double>& labels() const { return labels_; }
    bool defined(Eigen::Index i, Eigen::Index j) const { return defined_(i, j); }

    double at(Eigen::Index i, Eigen::Index j) const {
        if (!defined_(i, j)) {
            throw UndefinedEntry(std::string(to_string(kind_)) + ": entry (" +
                                 std::to_string(i) + "," + std::to_string(j) +
                                 ") is undefined (vanishing input coherence)");
        }
        return v_(i, j);
    }

private:
    PairKind kind_;
    RMatrix v_;
    std::vector<double> labels_;
    Mask defined_;
};

// Outcome probability with the conditional system state; the density matrix is
// absent for outcomes with negligible probability.
struct ConditionalOutput {
    Eigen::Index outcome = 0;
    double prob = 0.0;
    std::optional<DensityMatrix> rho;
};

struct SteeringReport {
    Eigen::Index a1 = 0;
    Eigen::Index a2 = 1;
    double resolution_r = 0.0;     // resolution of the readout maximizing information
    double irreversible_c = 0.0;   // irreversible decoherence of the competing readout
    bool violation = false;        // resolution_r - irreversible_c > margin
    double margin = 1e-9;
    std::string readout_r;
    std::string readout_c;
};

struct SteeringAverages {
    double avg_root_diag = 0.0;  // sum_m p(m) sqrt(rho_m[a1,a1] rho_m[a2,a2])
    double avg_coherence = 0.0;  // sum_m p(m) |rho_m[a1,a2]|
};

namespace detail {

// Probability of a negligible outcome; below this, conditional states are not
// formed and Bhattacharyya terms contribute exactly zero.
inline constexpr double kProbFloor = 1e-12;

inline double bhattacharyya(const RMatrix& p, Eigen::Index a1, Eigen::Index a2) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < p.rows(); ++m) sum += std::sqrt(p(m, a1) * p(m, a2));
    return sum;
}

inline double hellinger_sq(const RMatrix& p, Eigen::Index a1, Eigen::Index a2) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < p.rows(); ++m) {
        const double diff = std::sqrt(p(m, a1)) - std::sqrt(p(m, a2));
        sum += diff * diff;
    }
    return 0.5 * sum;
}

inline void check_system_input(const MeasurementInteraction& mi, const DensityMatrix& rho_in) {
    if (rho_in.dim() != mi.branches()) {
        throw DimensionError("input state has dim " + std::to_string(rho_in.dim()) +
                             ", interaction has " + std::to_string(mi.branches()) +
                             " eigenstates");
    }
}

}  // namespace detail

/// P(m|a) = |<m|W|phi(a)>|^2.
inline CondProbTable cond_probs(const MeasurementInteraction& mi, const ReadoutStrategy& r,
                                double tol = default_tolerances().validity) {
    const CMatrix amp = outcome_amplitudes(mi, r);
    RMatrix p = amp.cwiseAbs2();
    for (Eigen::Index m = 0; m < p.rows(); ++m) {
        for (Eigen::Index a = 0; a < p.cols(); ++a) {
            if (p(m, a) < -1e-12 || p(m, a) > 1.0 + 1e-12) {
                throw InternalError("cond_probs: probability " + detail::fmt(p(m, a)) +
                                    " outside [0,1] beyond rounding slack");
            }
            p(m, a) = std::min(1.0, std::max(0.0, p(m, a)));
        }
    }
    CondProbTable table{std::move(p), mi.labels()};
    table.validate(tol);
    return table;
}

/// Squared Hellinger distance R(a1,a2) = 1 - sum_m sqrt(P(m|a1) P(m|a2)).
inline PairMatrix resolution(const CondProbTable& table) {
    const Eigen::Index n = table.branches();
    RMatrix r = RMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double value = 1.0 - detail::bhattacharyya(table.p, i, j);
            // same quantity through the defining Hellinger form; both routes
            // must agree to rounding
            const double direct = detail::hellinger_sq(table.p, i, j);
            if (std::abs(value - direct) > 1e-12) {
                throw InternalError("resolution: Bhattacharyya and Hellinger forms differ by " +
                                    detail::fmt(std::abs(value - direct)));
            }
            r(i, j) = r(j, i) = value;
        }
    }
    return PairMatrix(PairKind::Resolution, std::move(r), table.a_labels);
}

/// D(a1,a2) = 1 - |<phi(a2)|phi(a1)>|; depends only on the interaction.
inline PairMatrix decoherence(const GramMatrix& g, std::vector<double> labels = {}) {
    const Eigen::Index n = g.dim();
    RMatrix d = RMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = d(j, i) = 1.0 - std::abs(g(j, i));
        }
    }
    return PairMatrix(PairKind::Decoherence, std::move(d), std::move(labels));
}

/// Unconditional output state: <a1|rho_out|a2> = <phi(a2)|phi(a1)> <a1|rho_in|a2>.
inline DensityMatrix output_density(const MeasurementInteraction& mi,
                                    const DensityMatrix& rho_in,
                                    double tol = default_tolerances().validity) {
    detail::check_system_input(mi, rho_in);
    const GramMatrix g = gram(mi);
    const Eigen::Index n = mi.branches();
    CMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = g(j, i) * rho_in.matrix()(i, j);
        }
    }
    return validate_density(out, tol, mi.labels());
}

/// Conditional output states: p(m) = sum_a P(m|a) <a|rho_in|a> and
/// <a1|rho_cond(m)|a2> = <phi(a2)|m><m|phi(a1)> / p(m) * <a1|rho_in|a2>.
inline std::vector<ConditionalOutput> conditional_outputs(
    const MeasurementInteraction& mi, const ReadoutStrategy& r, const DensityMatrix& rho_in,
    double tol = default_tolerances().validity) {
    detail::check_system_input(mi, rho_in);
    const CMatrix amp = outcome_amplitudes(mi, r);
    const Eigen::Index n = mi.branches();
    const Eigen::Index outcomes = amp.rows();

    std::vector<ConditionalOutput> outs;
    outs.reserve(static_cast<std::size_t>(outcomes));
    double total = 0.0;
    for (Eigen::Index m = 0; m < outcomes; ++m) {
        double pm = 0.0;
        for (Eigen::Index a = 0; a < n; ++a) {
            pm += std::norm(amp(m, a)) * rho_in.matrix()(a, a).real();
        }
        pm = std::max(0.0, pm);
        total += pm;
        ConditionalOutput out{m, pm, std::nullopt};
        if (pm > detail::kProbFloor) {
            CMatrix rho(n, n);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < n; ++j) {
                    rho(i, j) = amp(m, i) * std::conj(amp(m, j)) * rho_in.matrix()(i, j) / pm;
                }
            }
            out.rho = validate_density(rho, tol, mi.labels());
        }
        outs.push_back(std::move(out));
    }
    if (std::abs(total - 1.0) > tol) {
        throw InternalError("conditional_outputs: outcome probabilities sum to " +
                            detail::fmt(total));
    }
    return outs;
}

/// D_irr(a1,a2) = 1 - sum_m sqrt(P(m|a1) P(m|a2)); equals the resolution of
/// the same readout, and both code paths are held to that within 1e-12.
inline PairMatrix irreversible_decoherence(const CondProbTable& table) {
    const Eigen::Index n = table.branches();
    RMatrix d = RMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = d(j, i) = 1.0 - detail::bhattacharyya(table.p, i, j);
        }
    }
    PairMatrix out(PairKind::IrreversibleDecoherence, std::move(d), table.a_labels);
    const PairMatrix res = resolution(table);
    const double dev = (out.values() - res.values()).cwiseAbs().maxCoeff();
    if (dev > 1e-12) {
        throw InternalError("irreversible_decoherence: deviates from resolution by " +
                            detail::fmt(dev));
    }
    return out;
}

/// State-based route: D_irr(a1,a2) = 1 - sum_m p(m)|<a1|rho_cond(m)|a2>| / |<a1|rho_in|a2>|.
/// Entries with vanishing input coherence are marked undefined.
inline PairMatrix irreversible_decoherence_from_states(const std::vector<ConditionalOutput>& outs,
                                                       const DensityMatrix& rho_in) {
    const Eigen::Index n = rho_in.dim();
    RMatrix d = RMatrix::Zero(n, n);
    PairMatrix::Mask defined = PairMatrix::Mask::Constant(n, n, true);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double in_coh = std::abs(rho_in.matrix()(i, j));
            if (in_coh <= detail::kProbFloor) {
                defined(i, j) = defined(j, i) = false;
                continue;
            }
            double avg = 0.0;
            for (const ConditionalOutput& out : outs) {
                if (!out.rho) continue;
                avg += out.prob * std::abs(out.rho->matrix()(i, j));
            }
            d(i, j) = d(j, i) = 1.0 - avg / in_coh;
        }
    }
    return PairMatrix(PairKind::IrreversibleDecoherence, std::move(d), rho_in.labels(),
                      defined);
}

/// Compares the resolution of readout `r` with the irreversible decoherence of
/// readout `c` for one eigenstate pair.
inline SteeringReport steering_report(const MeasurementInteraction& mi, const ReadoutStrategy& r,
                                      const ReadoutStrategy& c,
                                      std::pair<Eigen::Index, Eigen::Index> pair,
                                      double margin = 1e-9) {
    if (pair.first == pair.second || pair.first < 0 || pair.second < 0 ||
        pair.first >= mi.branches() || pair.second >= mi.branches()) {
        throw DimensionError("steering_report: invalid eigenstate pair (" +
                             std::to_string(pair.first) + "," + std::to_string(pair.second) +
                             ")");
    }
    SteeringReport report;
    report.a1 = pair.first;
    report.a2 = pair.second;
    report.resolution_r = resolution(cond_probs(mi, r)).at(pair.first, pair.second);
    report.irreversible_c =
        irreversible_decoherence(cond_probs(mi, c)).at(pair.first, pair.second);
    report.margin = margin;
    report.violation = report.resolution_r - report.irreversible_c > margin;
    report.readout_r = r.name();
    report.readout_c = c.name();
    return report;
}

/// Readout-averaged diagnostics of the conditional states for one pair:
/// avg_root_diag recovers (1-R) sqrt(rho_in[a1,a1] rho_in[a2,a2]) and
/// avg_coherence recovers (1-D_irr) |rho_in[a1,a2]|. Positivity of every
/// conditional state is asserted along the way.
inline SteeringAverages steering_averages(const std::vector<ConditionalOutput>& outs,
                                          const DensityMatrix& rho_in,
                                          std::pair<Eigen::Index, Eigen::Index> pair,
                                          double tol = default_tolerances().validity) {
    const Eigen::Index a1 = pair.first;
    const Eigen::Index a2 = pair.second;
    if (a1 < 0 || a2 < 0 || a1 >= rho_in.dim() || a2 >= rho_in.dim()) {
        throw DimensionError("steering_averages: invalid eigenstate pair");
    }
    SteeringAverages avg;
    for (const ConditionalOutput& out : outs) {
        if (!out.rho) continue;
        const CMatrix& rho = out.rho->matrix();
        const double d1 = std::max(0.0, rho(a1, a1).real());
        const double d2 = std::max(0.0, rho(a2, a2).real());
        const double coh = std::abs(rho(a1, a2));
        if (coh > std::sqrt(d1 * d2) + tol) {
            throw InternalError("steering_averages: conditional state for outcome " +
                                std::to_string(out.outcome) + " violates positivity: |coh| = " +
                                detail::fmt(coh) + " > sqrt(diag product) = " +
                                detail::fmt(std::sqrt(d1 * d2)));
        }
        avg.avg_root_diag += out.prob * std::sqrt(d1 * d2);
        avg.avg_coherence += out.prob * coh;
    }
    return avg;
}

}  // namespace mlab
