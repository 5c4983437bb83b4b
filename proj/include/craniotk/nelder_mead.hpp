#pragma once

#include <functional>
#include <vector>

namespace craniotk {

struct SimplexResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    /// Objective spread across the simplex fell below the tolerance.
    bool converged = false;
    /// Best value after each iteration.
    std::vector<double> best_history;
};

/// Derivative-free minimisation (Nelder-Mead with the usual reflection 1,
/// expansion 2, contraction 1/2 and shrink 1/2 coefficients). The initial
/// simplex is x0 plus one vertex per axis displaced by steps[i].
SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0, const std::vector<double>& steps, int max_iterations,
                          double tolerance);

} // namespace craniotk
