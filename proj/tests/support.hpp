#pragma once

// Shared test helpers: random networks and reference implementations that
// deliberately avoid the library's own code paths.

#include "crown/model.hpp"
#include "crown/propagation.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace crown::testing {

using Rng = std::mt19937_64;

/// widths = {n0, n1, ..., nm}. Weights ~ N(0, scale^2 / fan_in).
Network random_network(Rng& rng, const std::vector<int>& widths, Activation act, double weight_scale = 1.0,
                       double bias_scale = 0.1);

/// Shifts the hidden biases so every hidden pre-activation at x0 sits within
/// `jitter` of zero, which makes neurons unstable for any positive radius.
Network center_on(const Network& net, const VectorXd& x0, Rng& rng, double jitter = 0.05);

VectorXd random_vector(Rng& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0);

/// Straight-line evaluation with plain loops and std:: math.
std::vector<double> reference_forward(const Network& net, const std::vector<double>& x);

std::vector<double> to_std(const VectorXd& v);

/// Fast-Lin output bounds written directly from its published recursion:
/// identical slopes u/(u-l) for unstable neurons, intercept -l applied to the
/// upper side only. Selector rows pick the output combinations (identity when
/// empty).
struct RefBounds {
    std::vector<double> lower, upper;
};
RefBounds fastlin_reference(const Network& net, const std::vector<double>& x0, double eps, Norm p,
                            const std::vector<std::vector<double>>& selector = {});

/// Brute-force max of a . x over the ball by enumerating the analytic
/// maximiser per norm (vertex / direction).
double linear_max_over_ball(const std::vector<double>& a, const std::vector<double>& x0, double eps, Norm p);

std::filesystem::path temp_dir();
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace crown::testing
