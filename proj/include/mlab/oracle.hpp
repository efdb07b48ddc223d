#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlab/analysis.hpp"
#include "mlab/core.hpp"
#include "mlab/errors.hpp"
#include "mlab/interaction.hpp"
#include "mlab/parallel.hpp"
#include "mlab/rng.hpp"

namespace mlab {

// Randomized cross-check suite configuration. All draws derive from `seed`
// through splitmix64 streams, so a report reproduces from (seed, cfg) alone.
struct RandomSuiteConfig {
    std::uint64_t seed = 0x6d6c61624f524cULL;
    int trials = 1000;
    std::pair<int, int> n_range{2, 4};  // inclusive
    std::pair<int, int> d_range{2, 5};  // inclusive
    int haar_samples = 10;

    void validate() const {
        if (trials < 1) throw ValidationError("RandomSuiteConfig: trials must be >= 1");
        if (n_range.first < 2 || n_range.second < n_range.first) {
            throw ValidationError("RandomSuiteConfig: empty or invalid n range");
        }
        if (d_range.first < 1 || d_range.second < d_range.first) {
            throw ValidationError("RandomSuiteConfig: empty or invalid d range");
        }
        if (haar_samples < 1) throw ValidationError("RandomSuiteConfig: haar_samples must be >= 1");
    }
};

/// n Haar-random conditional meter states of dimension d; deterministic for
/// a given (cfg.seed, n, d, salt).
inline MeasurementInteraction random_interaction(const RandomSuiteConfig& cfg, int n, int d,
                                                 std::uint64_t salt = 0) {
    if (n < 2 || d < 1) {
        throw DimensionError("random_interaction: need n >= 2 and d >= 1, got n=" +
                             std::to_string(n) + " d=" + std::to_string(d));
    }
    SplitMix64 rng(mix_seed(cfg.seed, 0x696e74ULL ^ (salt * 2654435761ULL + n * 31 + d)));
    std::vector<CVector> phi;
    std::vector<double> labels;
    phi.reserve(n);
    labels.reserve(n);
    for (int a = 0; a < n; ++a) {
        phi.push_back(random_unit_vector(d, rng));
        labels.push_back(static_cast<double>(a));
    }
    return MeasurementInteraction::from_states(std::move(labels), std::move(phi));
}

/// Readout in the basis given by the columns of a Haar-random unitary.
inline ReadoutStrategy haar_readout(const RandomSuiteConfig& cfg, int d,
                                    std::uint64_t salt = 0) {
    if (d < 1) throw DimensionError("haar_readout: need d >= 1");
    SplitMix64 rng(mix_seed(cfg.seed, 0x726f75ULL ^ (salt * 2654435761ULL + d)));
    return ReadoutStrategy::from_basis(haar_unitary(d, rng),
                                       "haar-" + std::to_string(salt));
}

/// Random density matrix V diag(p) V^dagger with Haar V and a normalized
/// uniform probability vector; pure = true draws a Haar-random pure state.
inline DensityMatrix random_density(int n, SplitMix64& rng, bool pure) {
    if (pure) {
        const CVector psi = random_unit_vector(n, rng);
        const CMatrix rho = psi * psi.adjoint();
        return validate_density(rho);
    }
    RVector p(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = rng.next_double_open();
        sum += p[i];
    }
    p /= sum;
    const CMatrix v = haar_unitary(n, rng);
    const CMatrix rho = v * p.cast<Complex>().asDiagonal() * v.adjoint();
    return validate_density(rho);
}

struct TrialLocator {
    std::uint64_t suite_seed = 0;
    int trial = -1;
    int readout = -1;
    int n = 0, d = 0;
    Eigen::Index a1 = 0, a2 = 0;
};

struct BoundCheckReport {
    RandomSuiteConfig config;
    int trials_run = 0;
    int violations = 0;
    double worst_gap = -1.0;  // max over everything of R - D
    TrialLocator worst;
    bool pass = false;
};

namespace detail {

inline std::pair<int, int> draw_dims(const RandomSuiteConfig& cfg, std::uint64_t trial) {
    SplitMix64 rng(mix_seed(cfg.seed, 0x64696dULL ^ (trial * 1000003ULL)));
    const int n_span = cfg.n_range.second - cfg.n_range.first + 1;
    const int d_span = cfg.d_range.second - cfg.d_range.first + 1;
    const int n = cfg.n_range.first + static_cast<int>(rng.next() % n_span);
    const int d = cfg.d_range.first + static_cast<int>(rng.next() % d_span);
    return {n, d};
}

}  // namespace detail

/// Property check of the uncertainty bound R <= D over random interactions and
/// Haar readouts. A violation is an implementation bug: the op throws
/// BoundViolated with the reproduction seed after recording the report.
inline BoundCheckReport sweep_bound_check(const RandomSuiteConfig& cfg) {
    cfg.validate();
    struct TrialResult {
        double gap = -1.0;
        TrialLocator where;
    };
    std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));
    parallel_for(results.size(), [&](std::size_t t) {
        const auto [n, d] = detail::draw_dims(cfg, t);
        const MeasurementInteraction mi = random_interaction(cfg, n, d, t);
        const PairMatrix dmat = decoherence(gram(mi), mi.labels());
        TrialResult best;
        for (int k = 0; k < cfg.haar_samples; ++k) {
            const ReadoutStrategy r = haar_readout(cfg, d, t * 1000003ULL + k + 1);
            const PairMatrix rmat = resolution(cond_probs(mi, r));
            for (Eigen::Index i = 0; i < rmat.dim(); ++i) {
                for (Eigen::Index j = i + 1; j < rmat.dim(); ++j) {
                    const double gap = rmat.at(i, j) - dmat.at(i, j);
                    if (gap > best.gap) {
                        best.gap = gap;
                        best.where = TrialLocator{cfg.seed, static_cast<int>(t), k, n, d, i, j};
                    }
                }
            }
        }
        results[t] = best;
    });

    BoundCheckReport report;
    report.config = cfg;
    report.trials_run = cfg.trials;
    for (const TrialResult& r : results) {
        if (r.gap > report.worst_gap) {
            report.worst_gap = r.gap;
            report.worst = r.where;
        }
        if (r.gap > 1e-10) ++report.violations;
    }
    report.pass = report.violations == 0;
    if (!report.pass) {
        throw BoundViolated("sweep_bound_check: R - D = " + detail::fmt(report.worst_gap) +
                            " at trial " + std::to_string(report.worst.trial) + " readout " +
                            std::to_string(report.worst.readout) + " (suite seed " +
                            std::to_string(cfg.seed) + "); this indicates an implementation bug");
    }
    return report;
}

/// Minimum over Haar-sampled readouts of the Bhattacharyya coefficient for one
/// eigenstate pair; never drops below |<phi(a1)|phi(a2)>|.
inline double bhattacharyya_supremum(const MeasurementInteraction& mi,
                                     std::pair<Eigen::Index, Eigen::Index> pair,
                                     const RandomSuiteConfig& cfg) {
    cfg.validate();
    const int d = static_cast<int>(mi.meter_dim());
    double min_bc = 1.0;
    for (int k = 0; k < cfg.haar_samples; ++k) {
        const ReadoutStrategy r = haar_readout(cfg, d, static_cast<std::uint64_t>(k));
        const CondProbTable table = cond_probs(mi, r);
        min_bc = std::min(min_bc, detail::bhattacharyya(table.p, pair.first, pair.second));
    }
    return min_bc;
}

// Aggregated worst-case deviations for the randomized invariant suite.
struct VerificationReport {
    RandomSuiteConfig config;
    BoundCheckReport bound;
    double worst_tradeoff_dev = 0.0;     // |D_irr(states) - R(table)| where defined
    double worst_reversible_dev = 0.0;   // elementwise |sum_m p(m) rho_m - rho_out|
    double worst_positivity_excess = 0.0;  // |coh| - sqrt(diag product), per outcome
    double worst_diag_dev = 0.0;         // |diag(rho_out) - diag(rho_in)|
    bool pass = false;

    static constexpr double tradeoff_tol = 1e-9;
    static constexpr double reversible_tol = 1e-10;
    static constexpr double positivity_tol = 1e-10;
    static constexpr double diag_tol = 1e-12;
};

/// sweep_bound_check plus the state-path invariants (trade-off equality,
/// reversible sum, per-outcome positivity, diagonal preservation) over random
/// pure and mixed inputs.
inline VerificationReport run_verification_suite(const RandomSuiteConfig& cfg) {
    cfg.validate();
    VerificationReport report;
    report.config = cfg;
    report.bound = sweep_bound_check(cfg);

    struct TrialDevs {
        double tradeoff = 0.0, reversible = 0.0, positivity = 0.0, diag = 0.0;
    };
    std::vector<TrialDevs> devs(static_cast<std::size_t>(cfg.trials));
    parallel_for(devs.size(), [&](std::size_t t) {
        const auto [n, d] = detail::draw_dims(cfg, t);
        const MeasurementInteraction mi = random_interaction(cfg, n, d, t);
        const ReadoutStrategy r = haar_readout(cfg, d, t * 1000003ULL + 1);
        const CondProbTable table = cond_probs(mi, r);
        const PairMatrix rmat = resolution(table);
        SplitMix64 rng(mix_seed(cfg.seed, 0x737461ULL ^ t));
        TrialDevs best;
        for (const bool pure : {true, false}) {
            const DensityMatrix rho_in = random_density(n, rng, pure);
            const DensityMatrix rho_out = output_density(mi, rho_in);
            const std::vector<ConditionalOutput> outs = conditional_outputs(mi, r, rho_in);

            best.diag = std::max(best.diag, (rho_out.matrix().diagonal().real() -
                                             rho_in.matrix().diagonal().real())
                                                .cwiseAbs()
                                                .maxCoeff());

            CMatrix sum = CMatrix::Zero(n, n);
            for (const ConditionalOutput& out : outs) {
                if (!out.rho) continue;
                sum += out.prob * out.rho->matrix();
                const CMatrix& rho = out.rho->matrix();
                for (Eigen::Index i = 0; i < n; ++i) {
                    for (Eigen::Index j = i + 1; j < n; ++j) {
                        const double excess =
                            std::abs(rho(i, j)) -
                            std::sqrt(std::max(0.0, rho(i, i).real()) *
                                      std::max(0.0, rho(j, j).real()));
                        best.positivity = std::max(best.positivity, excess);
                    }
                }
            }
            best.reversible = std::max(
                best.reversible, (sum - rho_out.matrix()).cwiseAbs().maxCoeff());

            const PairMatrix dirr = irreversible_decoherence_from_states(outs, rho_in);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    if (!dirr.defined(i, j)) continue;
                    best.tradeoff =
                        std::max(best.tradeoff, std::abs(dirr.at(i, j) - rmat.at(i, j)));
                }
            }
        }
        devs[t] = best;
    });
    for (const TrialDevs& d : devs) {
        report.worst_tradeoff_dev = std::max(report.worst_tradeoff_dev, d.tradeoff);
        report.worst_reversible_dev = std::max(report.worst_reversible_dev, d.reversible);
        report.worst_positivity_excess = std::max(report.worst_positivity_excess, d.positivity);
        report.worst_diag_dev = std::max(report.worst_diag_dev, d.diag);
    }
    report.pass = report.bound.pass &&
                  report.worst_tradeoff_dev <= VerificationReport::tradeoff_tol &&
                  report.worst_reversible_dev <= VerificationReport::reversible_tol &&
                  report.worst_positivity_excess <= VerificationReport::positivity_tol &&
                  report.worst_diag_dev <= VerificationReport::diag_tol;
    return report;
}

}  // namespace mlab
