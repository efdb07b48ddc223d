#pragma once

namespace mlab {

// Single knob for all numeric tolerances used across the library.
struct ToleranceConfig {
    double validity = 1e-10;        // Hermiticity, normalization, positivity, isometry checks
    double reconstruction = 1e-9;   // eigendecomposition / readout reconstruction checks
    double optimization = 1e-8;     // factorization residual target
};

inline const ToleranceConfig& default_tolerances() {
    static const ToleranceConfig cfg{};
    return cfg;
}

}  // namespace mlab
