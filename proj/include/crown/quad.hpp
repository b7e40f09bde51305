#pragma once

#include "crown/model.hpp"
#include "crown/propagation.hpp"

#include <variant>
#include <vector>

namespace crown {

enum class Sense { Maximize, Minimize };

struct BoxDomain {
    VectorXd lo;
    VectorXd hi;
};

using QuadDomain = std::variant<BallSpec, BoxDomain>;

/// objective(z) = z' Q z + linear' z + constant over `domain`, where z is the
/// post-activation of layer m-2 (the input itself when m = 2).
struct QuadraticForm {
    MatrixXd Q;
    VectorXd linear;
    double constant = 0.0;
    Sense sense = Sense::Minimize;
    QuadDomain domain;
    /// Per-neuron weights q_i with Q = W' diag(q) W; carries the sign rule.
    VectorXd curvature;

    double value(const VectorXd& z) const { return z.dot(Q * z) + linear.dot(z) + constant; }
};

struct PgdConfig {
    int max_iters = 200;
    double init_step = 1.0;
    double shrink = 0.5;
    double armijo_c = 1e-4;
    double stop_rel = 1e-9;
};

struct PgdResult {
    /// Certified extremum: the best iterate corrected by the linearisation
    /// gap, so it never overshoots the true optimum in the optimisation sense.
    double value = 0.0;
    /// Objective at the returned point.
    double primal = 0.0;
    double gap = 0.0;
    VectorXd argpoint;
    int iterations = 0;
    /// Accepted objective values, first entry at the starting point.
    std::vector<double> history;
};

struct QuadOptions {
    /// Replace the quadratic lower parabola with the linear lower bound of
    /// `linear_lower`, which turns the form back into a linear plane.
    bool zero_curvature = false;
    ReluLowerStrategy linear_lower = ReluLowerStrategy::Adaptive;
};

/// Relaxation used at layer m-1: linear upper, parabola lower on unstable
/// neurons, exact on stable ones.
LayerRelaxation quadratic_layer_relaxation(const VectorXd& lower, const VectorXd& upper, const QuadOptions& opt = {});

/// Quadratic bound on output row `row` of a ReLU network. `bounds` must hold
/// pre-activation intervals for layers 1..m-1.
QuadraticForm build_quadratic(const Network& net, Eigen::Index row, const LayerBounds& bounds, const BallSpec& ball,
                              Sense sense, const QuadOptions& opt = {});

PgdResult pgd_optimize(const QuadraticForm& qf, const PgdConfig& cfg = {});

/// Lower bound on f_c - f_t over the ball from the quadratic relaxation.
/// The ball centre is the data point x0.
double crown_quad_margin(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball,
                         const PgdConfig& cfg = {}, const QuadOptions& opt = {});

}  // namespace crown
