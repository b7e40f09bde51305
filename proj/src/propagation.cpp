#include "crown/propagation.hpp"

#include <cmath>
#include <string>

namespace crown {

std::string_view to_string(Norm p) {
    switch (p) {
        case Norm::L1: return "1";
        case Norm::L2: return "2";
        case Norm::Linf: return "inf";
    }
    return "?";
}

Norm parse_norm(std::string_view text) {
    if (text == "1") return Norm::L1;
    if (text == "2") return Norm::L2;
    if (text == "inf" || text == "Inf" || text == "i") return Norm::Linf;
    throw ValueError("unknown norm '" + std::string(text) + "' (expected 1, 2 or inf)");
}

double dual_norm(const VectorXd& v, Norm p) {
    switch (p) {
        case Norm::L1: return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
        case Norm::L2: return v.norm();
        case Norm::Linf: return v.cwiseAbs().sum();
    }
    return 0.0;
}

double norm_of(const VectorXd& v, Norm p) {
    switch (p) {
        case Norm::L1: return v.cwiseAbs().sum();
        case Norm::L2: return v.norm();
        case Norm::Linf: return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
    }
    return 0.0;
}

namespace {

// One relaxation step. `coef` holds the coefficients on the post-activation
// of the layer; on return it holds the coefficients on its pre-activation and
// `bias` has absorbed the intercepts. Non-negative coefficients take the
// relaxation named by `upper_first`, negative ones the other.
void relax_step(MatrixXd& coef, VectorXd& bias, const LayerRelaxation& r, bool upper_first) {
    const Eigen::ArrayXd& a_pos = upper_first ? r.alpha_u : r.alpha_l;
    const Eigen::ArrayXd& a_neg = upper_first ? r.alpha_l : r.alpha_u;
    const Eigen::ArrayXd& d_pos = upper_first ? r.delta_u : r.delta_l;
    const Eigen::ArrayXd& d_neg = upper_first ? r.delta_l : r.delta_u;

    const auto c = coef.array();
    const auto nonneg = (c >= 0.0);
    bias.array() += nonneg.select(c.rowwise() * d_pos.transpose(), c.rowwise() * d_neg.transpose()).rowwise().sum();
    coef = nonneg.select(c.rowwise() * a_pos.transpose(), c.rowwise() * a_neg.transpose()).matrix();
}

bool is_dead(const LayerRelaxation& r) {
    return (r.alpha_u == 0.0).all() && (r.alpha_l == 0.0).all();
}

}  // namespace

BoundingPlanes backward_plane_prefix(const Network& net, std::size_t depth, std::span<const LayerRelaxation> relax,
                                     const MatrixXd& selector) {
    if (depth == 0 || depth > net.depth()) throw ValueError("backward pass depth out of range");
    if (relax.size() < depth - 1)
        throw ShapeError("need relaxations for " + std::to_string(depth - 1) + " hidden layers, got " +
                         std::to_string(relax.size()));
    const Layer& top = net.layer(depth - 1);
    const bool identity = selector.size() == 0;
    if (!identity && selector.cols() != top.out_dim())
        throw ShapeError("selector has " + std::to_string(selector.cols()) + " columns, layer has " +
                         std::to_string(top.out_dim()) + " outputs");

    MatrixXd coef_u = identity ? top.weight : MatrixXd(selector * top.weight);
    VectorXd bias_u = identity ? top.bias : VectorXd(selector * top.bias);
    MatrixXd coef_l = coef_u;
    VectorXd bias_l = bias_u;
    const Eigen::Index rows = coef_u.rows();

    for (std::size_t k = depth - 1; k >= 1; --k) {
        const LayerRelaxation& r = relax[k - 1];
        const Layer& L = net.layer(k - 1);
        if (r.size() != L.out_dim())
            throw ShapeError("relaxation for layer " + std::to_string(k) + " has " + std::to_string(r.size()) +
                             " neurons, layer has " + std::to_string(L.out_dim()));
        relax_step(coef_u, bias_u, r, true);
        relax_step(coef_l, bias_l, r, false);
        if (is_dead(r)) {
            // Constant layer: nothing below it reaches the output.
            coef_u = MatrixXd::Zero(rows, net.input_dim());
            coef_l = MatrixXd::Zero(rows, net.input_dim());
            break;
        }
        bias_u.noalias() += coef_u * L.bias;
        bias_l.noalias() += coef_l * L.bias;
        coef_u = coef_u * L.weight;
        coef_l = coef_l * L.weight;
    }
    return BoundingPlanes{std::move(coef_u), std::move(coef_l), std::move(bias_u), std::move(bias_l)};
}

BoundingPlanes backward_plane(const Network& net, std::span<const LayerRelaxation> relax, const MatrixXd& selector) {
    if (relax.size() != net.depth() - 1)
        throw ShapeError("need relaxations for " + std::to_string(net.depth() - 1) + " hidden layers, got " +
                         std::to_string(relax.size()));
    return backward_plane_prefix(net, net.depth(), relax, selector);
}

GlobalBounds global_bounds(const BoundingPlanes& planes, const BallSpec& ball) {
    if (!(ball.radius >= 0.0) || !std::isfinite(ball.radius)) throw ValueError("ball radius must be finite and >= 0");
    if (planes.lambda0.cols() != ball.center.size() || planes.omega0.cols() != ball.center.size())
        throw ShapeError("plane dimension " + std::to_string(planes.lambda0.cols()) + " differs from ball dimension " +
                         std::to_string(ball.center.size()));

    VectorXd up_norm, lo_norm;
    switch (ball.p) {
        case Norm::L1:
            up_norm = planes.lambda0.cwiseAbs().rowwise().maxCoeff();
            lo_norm = planes.omega0.cwiseAbs().rowwise().maxCoeff();
            break;
        case Norm::L2:
            up_norm = planes.lambda0.rowwise().norm();
            lo_norm = planes.omega0.rowwise().norm();
            break;
        case Norm::Linf:
            up_norm = planes.lambda0.cwiseAbs().rowwise().sum();
            lo_norm = planes.omega0.cwiseAbs().rowwise().sum();
            break;
    }
    GlobalBounds out;
    out.upper = ball.radius * up_norm + planes.lambda0 * ball.center + planes.upper_bias;
    out.lower = -ball.radius * lo_norm + planes.omega0 * ball.center + planes.lower_bias;
    return out;
}

SweepResult layer_sweep(const Network& net, const BallSpec& ball, ReluLowerStrategy strategy) {
    if (ball.center.size() != net.input_dim())
        throw ShapeError("ball centre has length " + std::to_string(ball.center.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    SweepResult out;
    const std::size_t hidden = net.depth() - 1;
    out.bounds.lower.reserve(hidden);
    out.bounds.upper.reserve(hidden);
    out.relax.reserve(hidden);
    for (std::size_t k = 1; k <= hidden; ++k) {
        const GlobalBounds gb = global_bounds(backward_plane_prefix(net, k, out.relax), ball);
        // Rounding can cross the two ends when the interval is a point.
        VectorXd lo = gb.lower.cwiseMin(gb.upper);
        VectorXd hi = gb.lower.cwiseMax(gb.upper);
        out.relax.push_back(relax_layer(net.activation(), lo, hi, strategy));
        out.bounds.lower.push_back(std::move(lo));
        out.bounds.upper.push_back(std::move(hi));
    }
    return out;
}

GlobalBounds output_bounds(const Network& net, const BallSpec& ball, ReluLowerStrategy strategy,
                           const MatrixXd& selector) {
    const SweepResult sweep = layer_sweep(net, ball, strategy);
    return global_bounds(backward_plane(net, sweep.relax, selector), ball);
}

}  // namespace crown
