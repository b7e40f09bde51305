#pragma once

#include "crown/model.hpp"
#include "crown/propagation.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace crown {

/// Best attack found against the margin f_c - f_t inside a ball. This is an
/// upper bound on the true minimum margin, never a certificate.
struct FalsifierReport {
    double min_margin_found = 0.0;
    std::optional<VectorXd> witness;
    int samples_used = 0;
    int attack_iters = 0;
    std::uint64_t seed = 0;
};

/// Uniform sample from the ball.
VectorXd sample_ball(const BallSpec& ball, std::mt19937_64& rng);

/// Euclidean projection onto the ball (exact for all three norms).
VectorXd project_ball(const BallSpec& ball, const VectorXd& x);

/// Gradient of f_c - f_t with respect to the input.
VectorXd margin_gradient(const Network& net, const VectorXd& x, Eigen::Index c, Eigen::Index t);

FalsifierReport falsify(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball, int n_samples,
                        int attack_iters, std::uint64_t seed);

/// Naive layer-by-layer interval propagation.
GlobalBounds interval_bounds(const Network& net, const BallSpec& ball);

struct GridExtrema {
    VectorXd min;
    VectorXd max;
    std::size_t points = 0;
};

inline constexpr std::size_t kGridBudget = 1'000'000;

/// Evaluates f on a lattice of spacing `resolution` covering the ball's
/// bounding box; lattice points outside the ball are pulled radially onto
/// its surface. Inner approximation of the true output range.
GridExtrema grid_exact_bounds(const Network& net, const BallSpec& ball, double resolution);

}  // namespace crown
