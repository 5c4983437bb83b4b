#include "craniotk/nelder_mead.hpp"

#include "craniotk/error.hpp"

#include <algorithm>
#include <numeric>

namespace craniotk {

SimplexResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                          const std::vector<double>& x0, const std::vector<double>& steps, int max_iterations,
                          double tolerance) {
    const std::size_t n = x0.size();
    if (n == 0 || steps.size() != n) {
        fail(ErrorCode::InvalidArgument, "nelder_mead: x0 and steps must be non-empty and equally sized");
    }
    constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<std::vector<double>> x(n + 1, x0);
    std::vector<double> fx(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        x[i + 1][i] += steps[i];
    }
    for (std::size_t i = 0; i <= n; ++i) {
        fx[i] = f(x[i]);
    }

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] < fx[b]; });
        std::vector<std::vector<double>> xs(n + 1);
        std::vector<double> fs(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            xs[i] = std::move(x[order[i]]);
            fs[i] = fx[order[i]];
        }
        x = std::move(xs);
        fx = std::move(fs);
    };
    auto along = [&](const std::vector<double>& from, const std::vector<double>& to, double t) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = from[i] + t * (to[i] - from[i]);
        }
        return r;
    };

    SimplexResult result;
    sort_simplex();
    int iter = 0;
    while (iter < max_iterations) {
        if (fx[n] - fx[0] < tolerance) {
            result.converged = true;
            break;
        }
        std::vector<double> centre(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < n; ++d) {
                centre[d] += x[i][d] / static_cast<double>(n);
            }
        }
        const auto xr = along(centre, x[n], -alpha);
        const double fr = f(xr);
        if (fr < fx[0]) {
            const auto xe = along(centre, xr, gamma);
            const double fe = f(xe);
            if (fe < fr) {
                x[n] = xe;
                fx[n] = fe;
            } else {
                x[n] = xr;
                fx[n] = fr;
            }
        } else if (fr < fx[n - 1]) {
            x[n] = xr;
            fx[n] = fr;
        } else {
            bool accepted = false;
            if (fr < fx[n]) {
                const auto xc = along(centre, xr, rho);
                const double fc = f(xc);
                if (fc <= fr) {
                    x[n] = xc;
                    fx[n] = fc;
                    accepted = true;
                }
            } else {
                const auto xc = along(centre, x[n], rho);
                const double fc = f(xc);
                if (fc < fx[n]) {
                    x[n] = xc;
                    fx[n] = fc;
                    accepted = true;
                }
            }
            if (!accepted) {
                for (std::size_t i = 1; i <= n; ++i) {
                    x[i] = along(x[0], x[i], sigma);
                    fx[i] = f(x[i]);
                }
            }
        }
        sort_simplex();
        ++iter;
        result.best_history.push_back(fx[0]);
    }
    if (!result.converged && fx[n] - fx[0] < tolerance) {
        result.converged = true;
    }
    result.x = x[0];
    result.value = fx[0];
    result.iterations = iter;
    return result;
}

} // namespace craniotk
