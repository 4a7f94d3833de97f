#pragma once

#include <span>
#include <vector>

namespace plurima {

/// Least-squares fit of y = m_inf + C * x^(-alpha) on the tail of a
/// sequence, x increasing. alpha is scanned over a fixed deterministic grid
/// with a parabolic refinement; (m_inf, C) are linear for each alpha.
struct PowerFit {
    double m_inf = 0.0;
    double coef = 0.0;
    double alpha = 0.0;
    double residual = 0.0;  // rms of fit residuals
    int points = 0;
    bool degenerate = false;  // flat tail; m_inf = mean, alpha meaningless
};

PowerFit fit_power_tail(std::span<const double> x, std::span<const double> y, int tail = 4);

/// Richardson extrapolation for a quantity with error C h^order, evaluated
/// at spacings h and h/2.
double richardson(double coarse, double fine, int order = 2);

/// True if v lies within [min, max] of the last `tail` entries, widened by
/// `slack` times their spread (extrapolation envelope check).
bool within_tail_envelope(double v, std::span<const double> y, int tail, double slack = 0.5);

}  // namespace plurima
