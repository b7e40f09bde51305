#include "crown/relaxation.hpp"

#include <cmath>
#include <string>

namespace crown {

namespace {

void check_interval(double l, double u) {
    if (!std::isfinite(l) || !std::isfinite(u)) throw ValueError("interval bounds must be finite");
    if (l > u) throw ValueError("interval is empty: l=" + std::to_string(l) + " > u=" + std::to_string(u));
}

NeuronRelaxation constant(double value) {
    NeuronRelaxation r;
    r.delta_u = value;
    r.delta_l = value;
    return r;
}

double chord_slope(Activation act, double l, double u) {
    return (activate(act, u) - activate(act, l)) / (u - l);
}

}  // namespace

LayerRelaxation::LayerRelaxation(Eigen::Index n)
    : alpha_u(Eigen::ArrayXd::Zero(n)),
      delta_u(Eigen::ArrayXd::Zero(n)),
      alpha_l(Eigen::ArrayXd::Zero(n)),
      delta_l(Eigen::ArrayXd::Zero(n)),
      eta_u(Eigen::ArrayXd::Zero(n)),
      eta_l(Eigen::ArrayXd::Zero(n)) {}

NeuronRelaxation LayerRelaxation::at(Eigen::Index i) const {
    return {alpha_u(i), delta_u(i), alpha_l(i), delta_l(i), eta_u(i), eta_l(i)};
}

void LayerRelaxation::set(Eigen::Index i, const NeuronRelaxation& r) {
    alpha_u(i) = r.alpha_u;
    delta_u(i) = r.delta_u;
    alpha_l(i) = r.alpha_l;
    delta_l(i) = r.delta_l;
    eta_u(i) = r.eta_u;
    eta_l(i) = r.eta_l;
}

Segment segment(double l, double u) {
    check_interval(l, u);
    if (l >= 0.0) return Segment::Pos;
    if (u <= 0.0) return Segment::Neg;
    return Segment::Mixed;
}

std::pair<double, double> activation_eval(Activation act, double y) {
    switch (act) {
        case Activation::ReLU: return {y > 0.0 ? y : 0.0, y > 0.0 ? 1.0 : 0.0};
        case Activation::Tanh: {
            const double t = std::tanh(y);
            return {t, 1.0 - t * t};
        }
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-y));
            return {s, s * (1.0 - s)};
        }
        case Activation::Arctan: return {std::atan(y), 1.0 / (1.0 + y * y)};
    }
    return {y, 1.0};
}

NeuronRelaxation relu_relaxation(double l, double u, ReluLowerStrategy strategy) {
    check_interval(l, u);
    if (l == u) return constant(activate(Activation::ReLU, l));
    NeuronRelaxation r;
    switch (segment(l, u)) {
        case Segment::Pos:
            r.alpha_u = r.alpha_l = 1.0;
            break;
        case Segment::Neg:
            break;
        case Segment::Mixed: {
            const double slope = u / (u - l);
            r.alpha_u = slope;
            r.delta_u = -l * slope;
            r.alpha_l = strategy == ReluLowerStrategy::FastLin ? slope : (u >= -l ? 1.0 : 0.0);
            break;
        }
    }
    return r;
}

NeuronRelaxation relu_quadratic_lower(double l, double u) {
    check_interval(l, u);
    if (!(l < 0.0 && 0.0 < u)) throw ValueError("quadratic ReLU lower bound needs l < 0 < u");
    NeuronRelaxation r = relu_relaxation(l, u, ReluLowerStrategy::Adaptive);
    const double width = u - l;
    r.eta_l = 1.0 / width;
    r.alpha_l = -l / width;
    r.delta_l = 0.0;
    return r;
}

TangentSearch tangent_point_search(Activation act, double anchor, TangentSide side, double limit, double tol,
                                   int max_iter) {
    if (act == Activation::ReLU) throw ValueError("tangent search needs an s-shaped activation");
    if (!(tol > 0.0)) throw ValueError("tangent search tolerance must be positive");
    if (!std::isfinite(anchor) || !std::isfinite(limit)) throw ValueError("tangent search bracket must be finite");

    const bool nonneg = side == TangentSide::NonNeg;
    if (nonneg ? limit < 0.0 : limit > 0.0) throw ValueError("invalid tangent search bracket");

    TangentSearch out;
    if (limit == 0.0) {
        out.escaped = true;
        return out;
    }
    if (nonneg ? anchor >= 0.0 : anchor <= 0.0)
        throw ValueError("tangent anchor must lie on the opposite side of zero from the bracket");

    const double f0 = activate(act, anchor);
    auto g = [&](double d) {
        const auto [v, dv] = activation_eval(act, d);
        return (v - f0) / (d - anchor) - dv;
    };

    // g <= 0 between zero and the tangency; g > 0 beyond it.
    const double g_far = g(limit);
    if (g_far <= 0.0) {
        out.escaped = true;
        out.d = limit;
        out.residual = g_far;
        return out;
    }

    double safe = 0.0;
    double far = limit;
    double g_safe = g(safe);
    if (g_safe > 0.0) {
        // Only reachable through rounding when the anchor is next to zero;
        // d = 0 carries the steepest slope and is always conservative.
        out.residual = g_safe;
        return out;
    }
    int it = 0;
    while (it < max_iter && std::abs(g_safe) > tol) {
        const double mid = 0.5 * (safe + far);
        if (mid == safe || mid == far) break;
        const double gm = g(mid);
        if (gm <= 0.0) {
            safe = mid;
            g_safe = gm;
        } else {
            far = mid;
        }
        ++it;
    }
    out.d = safe;
    out.residual = g_safe;
    out.iterations = it;
    return out;
}

NeuronRelaxation sshaped_relaxation(Activation act, double l, double u) {
    if (act == Activation::ReLU) throw ValueError("sshaped_relaxation does not handle ReLU");
    check_interval(l, u);
    if (l == u) return constant(activate(act, l));

    const double fl = activate(act, l);
    const double fu = activate(act, u);
    const double chord = chord_slope(act, l, u);
    NeuronRelaxation r;
    switch (segment(l, u)) {
        case Segment::Pos: {
            const double d = 0.5 * (l + u);
            const auto [fd, dd] = activation_eval(act, d);
            r.alpha_u = dd;
            r.delta_u = fd - dd * d;
            r.alpha_l = chord;
            r.delta_l = fl - chord * l;
            break;
        }
        case Segment::Neg: {
            const double d = 0.5 * (l + u);
            const auto [fd, dd] = activation_eval(act, d);
            r.alpha_l = dd;
            r.delta_l = fd - dd * d;
            r.alpha_u = chord;
            r.delta_u = fl - chord * l;
            break;
        }
        case Segment::Mixed: {
            const TangentSearch up = tangent_point_search(act, l, TangentSide::NonNeg, u);
            r.alpha_u = up.escaped ? chord : activation_eval(act, up.d).second;
            r.delta_u = fl - r.alpha_u * l;
            const TangentSearch lo = tangent_point_search(act, u, TangentSide::NonPos, l);
            r.alpha_l = lo.escaped ? chord : activation_eval(act, lo.d).second;
            r.delta_l = fu - r.alpha_l * u;
            break;
        }
    }
    return r;
}

NeuronRelaxation relax_neuron(Activation act, double l, double u, ReluLowerStrategy strategy) {
    if (act == Activation::ReLU) return relu_relaxation(l, u, strategy);
    return sshaped_relaxation(act, l, u);
}

LayerRelaxation relax_layer(Activation act, const VectorXd& lower, const VectorXd& upper,
                            ReluLowerStrategy strategy) {
    if (lower.size() != upper.size()) throw ShapeError("bound vectors differ in length");
    LayerRelaxation out(lower.size());
    for (Eigen::Index i = 0; i < lower.size(); ++i) out.set(i, relax_neuron(act, lower(i), upper(i), strategy));
    return out;
}

}  // namespace crown
