#pragma once

#include "crown/model.hpp"

#include <utility>

namespace crown {

/// Sandwich of an activation on one neuron's pre-activation interval:
///   eta_l*y^2 + alpha_l*y + delta_l <= act(y) <= eta_u*y^2 + alpha_u*y + delta_u.
/// Intercepts are stored as delta = alpha * beta so a vanishing slope never
/// divides anything.
struct NeuronRelaxation {
    double alpha_u = 0.0;
    double delta_u = 0.0;
    double alpha_l = 0.0;
    double delta_l = 0.0;
    double eta_u = 0.0;
    double eta_l = 0.0;

    double upper(double y) const { return eta_u * y * y + alpha_u * y + delta_u; }
    double lower(double y) const { return eta_l * y * y + alpha_l * y + delta_l; }
};

/// Column layout of one layer's relaxations, used by the backward pass.
struct LayerRelaxation {
    Eigen::ArrayXd alpha_u, delta_u, alpha_l, delta_l, eta_u, eta_l;

    explicit LayerRelaxation(Eigen::Index n = 0);
    Eigen::Index size() const { return alpha_u.size(); }
    NeuronRelaxation at(Eigen::Index i) const;
    void set(Eigen::Index i, const NeuronRelaxation& r);
};

enum class Segment { Pos, Neg, Mixed };

/// Lower slope rule for unstable ReLU neurons.
enum class ReluLowerStrategy { FastLin, Adaptive };

enum class TangentSide { NonNeg, NonPos };

struct TangentSearch {
    double d = 0.0;
    double residual = 0.0;
    int iterations = 0;
    /// True when no tangency exists inside the bracket; callers fall back to
    /// the chord.
    bool escaped = false;
};

inline constexpr double kTangentTol = 1e-9;
inline constexpr int kTangentMaxIter = 200;

Segment segment(double l, double u);

/// Value and derivative. The ReLU derivative at 0 is taken as 0.
std::pair<double, double> activation_eval(Activation act, double y);

NeuronRelaxation relu_relaxation(double l, double u, ReluLowerStrategy strategy);

/// Linear upper bound plus the parabola y(y-l)/(u-l) as lower bound. Only
/// defined for l < 0 < u.
NeuronRelaxation relu_quadratic_lower(double l, double u);

NeuronRelaxation sshaped_relaxation(Activation act, double l, double u);

/// Bisection for the point d where the line through `anchor` is tangent to
/// the activation: g(d) = (act(d) - act(y0)) / (d - y0) - act'(d) = 0.
/// NonNeg searches [0, limit], NonPos searches [limit, 0]. The returned d is
/// taken from the side of the root whose tangent slope is conservative.
TangentSearch tangent_point_search(Activation act, double anchor, TangentSide side, double limit,
                                   double tol = kTangentTol, int max_iter = kTangentMaxIter);

/// Dispatches on the activation. ReLU uses `strategy`; the s-shaped
/// activations ignore it.
NeuronRelaxation relax_neuron(Activation act, double l, double u, ReluLowerStrategy strategy);

LayerRelaxation relax_layer(Activation act, const VectorXd& lower, const VectorXd& upper,
                            ReluLowerStrategy strategy);

}  // namespace crown
