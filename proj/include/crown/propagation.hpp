#pragma once

#include "crown/model.hpp"
#include "crown/relaxation.hpp"

#include <span>
#include <utility>
#include <vector>

namespace crown {

enum class Norm { L1, L2, Linf };

std::string_view to_string(Norm p);
Norm parse_norm(std::string_view text);

/// ||v||_q for the q dual to `p` (1 <-> inf, 2 <-> 2).
double dual_norm(const VectorXd& v, Norm p);
/// ||v||_p.
double norm_of(const VectorXd& v, Norm p);

/// The input region {x : ||x - center||_p <= radius}.
struct BallSpec {
    VectorXd center;
    double radius = 0.0;
    Norm p = Norm::Linf;
};

/// Linear functions of the input that bound each selected output from above
/// (lambda0 * x + upper_bias) and below (omega0 * x + lower_bias).
struct BoundingPlanes {
    MatrixXd lambda0;
    MatrixXd omega0;
    VectorXd upper_bias;
    VectorXd lower_bias;
};

/// Pre-activation intervals for hidden layers 1..m-1 (index 0 is layer 1).
struct LayerBounds {
    std::vector<VectorXd> lower;
    std::vector<VectorXd> upper;
};

struct GlobalBounds {
    VectorXd lower;
    VectorXd upper;
};

/// Backward accumulation through every layer of `net`, using `relax[k]` for
/// hidden layer k+1. `selector` (rows x n_m) picks the output combinations;
/// an empty matrix means the identity.
BoundingPlanes backward_plane(const Network& net, std::span<const LayerRelaxation> relax,
                              const MatrixXd& selector = MatrixXd());

/// Same recursion on the first `depth` layers of `net`; the output is the
/// pre-activation of layer `depth`.
BoundingPlanes backward_plane_prefix(const Network& net, std::size_t depth, std::span<const LayerRelaxation> relax,
                                     const MatrixXd& selector = MatrixXd());

/// Closed-form extrema of the planes over the ball.
GlobalBounds global_bounds(const BoundingPlanes& planes, const BallSpec& ball);

struct SweepResult {
    LayerBounds bounds;
    std::vector<LayerRelaxation> relax;
};

/// Pre-activation bounds and relaxations for hidden layers 1..m-1, computed
/// front to back; stage k reuses the relaxations of stages < k.
SweepResult layer_sweep(const Network& net, const BallSpec& ball, ReluLowerStrategy strategy);

/// layer_sweep followed by a full-depth backward pass and closure.
GlobalBounds output_bounds(const Network& net, const BallSpec& ball, ReluLowerStrategy strategy,
                           const MatrixXd& selector = MatrixXd());

}  // namespace crown
