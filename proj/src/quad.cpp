#include "crown/quad.hpp"

#include <cmath>
#include <string>

namespace crown {

namespace {

VectorXd domain_center(const QuadDomain& dom) {
    if (const auto* ball = std::get_if<BallSpec>(&dom)) return ball->center;
    const auto& box = std::get<BoxDomain>(dom);
    return 0.5 * (box.lo + box.hi);
}

VectorXd project(const QuadDomain& dom, const VectorXd& z) {
    if (const auto* ball = std::get_if<BallSpec>(&dom)) {
        if (ball->p == Norm::Linf) {
            return z.array().max(ball->center.array() - ball->radius).min(ball->center.array() + ball->radius).matrix();
        }
        const VectorXd off = z - ball->center;
        const double n = off.norm();
        if (n <= ball->radius) return z;
        return ball->center + off * (ball->radius / n);
    }
    const auto& box = std::get<BoxDomain>(dom);
    return z.cwiseMax(box.lo).cwiseMin(box.hi);
}

// min over the domain of g'z.
double linear_min(const QuadDomain& dom, const VectorXd& g) {
    if (const auto* ball = std::get_if<BallSpec>(&dom)) return g.dot(ball->center) - ball->radius * dual_norm(g, ball->p);
    const auto& box = std::get<BoxDomain>(dom);
    return (g.array() * box.lo.array()).min(g.array() * box.hi.array()).sum();
}

void check_convex(const QuadraticForm& qf, double sign) {
    const double scale = std::max(1.0, qf.Q.cwiseAbs().maxCoeff());
    if ((qf.Q - qf.Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ValueError("quadratic form is not symmetric");
    if (qf.curvature.size() > 0) {
        if (((sign * qf.curvature).array() < 0.0).any())
            throw ValueError("quadratic form violates the curvature sign rule for its sense");
        return;
    }
    if (qf.Q.size() == 0) return;
    const Eigen::LDLT<MatrixXd> ldlt(sign * qf.Q);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < -1e-10 * scale).any())
        throw ValueError("quadratic form is indefinite");
}

}  // namespace

LayerRelaxation quadratic_layer_relaxation(const VectorXd& lower, const VectorXd& upper, const QuadOptions& opt) {
    if (lower.size() != upper.size()) throw ShapeError("bound vectors differ in length");
    LayerRelaxation out(lower.size());
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        const double l = lower(i), u = upper(i);
        if (l < 0.0 && 0.0 < u)
            out.set(i, opt.zero_curvature ? relu_relaxation(l, u, opt.linear_lower) : relu_quadratic_lower(l, u));
        else
            out.set(i, relu_relaxation(l, u, opt.linear_lower));
    }
    return out;
}

QuadraticForm build_quadratic(const Network& net, Eigen::Index row, const LayerBounds& bounds, const BallSpec& ball,
                              Sense sense, const QuadOptions& opt) {
    if (net.activation() != Activation::ReLU) throw UnsupportedError("quadratic bounds need a ReLU network");
    const std::size_t m = net.depth();
    if (m < 2) throw UnsupportedError("quadratic bounds need at least one hidden layer");
    if (row < 0 || row >= net.output_dim()) throw ValueError("output row out of range");
    if (bounds.lower.size() != m - 1 || bounds.upper.size() != m - 1)
        throw ShapeError("layer bounds must cover all hidden layers");

    const LayerRelaxation r = quadratic_layer_relaxation(bounds.lower[m - 2], bounds.upper[m - 2], opt);
    const Layer& hidden = net.layer(m - 2);
    const Layer& out = net.layer(m - 1);
    const Eigen::ArrayXd w = out.weight.row(row).transpose().array();

    // Non-negative output weights take the upper relaxation when maximizing
    // and the lower one when minimizing.
    const auto nonneg = (w >= 0.0);
    const bool up_first = sense == Sense::Maximize;
    const Eigen::ArrayXd eta = up_first ? nonneg.select(r.eta_u, r.eta_l) : nonneg.select(r.eta_l, r.eta_u);
    const Eigen::ArrayXd alpha = up_first ? nonneg.select(r.alpha_u, r.alpha_l) : nonneg.select(r.alpha_l, r.alpha_u);
    const Eigen::ArrayXd delta = up_first ? nonneg.select(r.delta_u, r.delta_l) : nonneg.select(r.delta_l, r.delta_u);

    const VectorXd q = (w * eta).matrix();
    const VectorXd a = (w * alpha).matrix();
    const VectorXd& b = hidden.bias;

    QuadraticForm qf;
    qf.sense = sense;
    qf.curvature = q;
    qf.Q = hidden.weight.transpose() * q.asDiagonal() * hidden.weight;
    qf.Q = 0.5 * (qf.Q + qf.Q.transpose()).eval();
    qf.linear = hidden.weight.transpose() * (2.0 * q.cwiseProduct(b) + a);
    qf.constant = b.dot(q.cwiseProduct(b)) + a.dot(b) + (w * delta).sum() + out.bias(row);

    if (m == 2) {
        if (ball.center.size() != net.input_dim()) throw ShapeError("ball dimension differs from network input");
        qf.domain = ball;
    } else {
        qf.domain = BoxDomain{bounds.lower[m - 3].cwiseMax(0.0), bounds.upper[m - 3].cwiseMax(0.0)};
    }
    return qf;
}

PgdResult pgd_optimize(const QuadraticForm& qf, const PgdConfig& cfg) {
    if (cfg.max_iters <= 0 || !(cfg.init_step > 0.0) || !(cfg.shrink > 0.0 && cfg.shrink < 1.0) ||
        !(cfg.armijo_c > 0.0) || !(cfg.stop_rel > 0.0))
        throw ValueError("invalid PGD configuration");
    if (const auto* ball = std::get_if<BallSpec>(&qf.domain)) {
        if (ball->p == Norm::L1) throw UnsupportedError("quadratic bounds do not support the l1 ball");
        if (!(ball->radius >= 0.0)) throw ValueError("ball radius must be >= 0");
    } else {
        const auto& box = std::get<BoxDomain>(qf.domain);
        if (box.lo.size() != box.hi.size() || (box.lo.array() > box.hi.array()).any())
            throw ValueError("invalid box domain");
    }
    const VectorXd center = domain_center(qf.domain);
    if (qf.Q.rows() != center.size() || qf.Q.cols() != center.size() || qf.linear.size() != center.size())
        throw ShapeError("quadratic form dimension differs from its domain");

    // Work with the minimisation of sign * objective.
    const double sign = qf.sense == Sense::Minimize ? 1.0 : -1.0;
    check_convex(qf, sign);
    auto phi = [&](const VectorXd& z) { return sign * qf.value(z); };
    auto grad = [&](const VectorXd& z) -> VectorXd { return sign * (2.0 * (qf.Q * z) + qf.linear); };

    PgdResult res;
    VectorXd z = center;
    double fz = phi(z);
    VectorXd g = grad(z);
    double gap = std::max(0.0, g.dot(z) - linear_min(qf.domain, g));
    double step = cfg.init_step;
    res.history.push_back(sign * fz);

    int it = 0;
    while (it < cfg.max_iters && gap > cfg.stop_rel * std::max(1.0, std::abs(fz))) {
        ++it;
        bool accepted = false;
        VectorXd trial;
        double f_trial = 0.0;
        for (int shrinks = 0; shrinks < 80; ++shrinks) {
            trial = project(qf.domain, z - step * g);
            f_trial = phi(trial);
            if (f_trial <= fz + cfg.armijo_c * g.dot(trial - z)) {
                accepted = true;
                break;
            }
            step *= cfg.shrink;
        }
        if (!accepted || trial == z) break;
        z = std::move(trial);
        fz = f_trial;
        g = grad(z);
        gap = std::max(0.0, g.dot(z) - linear_min(qf.domain, g));
        res.history.push_back(sign * fz);
        step /= cfg.shrink;
    }

    res.iterations = it;
    res.gap = gap;
    res.primal = sign * fz;
    res.value = sign * (fz - gap);
    res.argpoint = std::move(z);
    return res;
}

double crown_quad_margin(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball,
                         const PgdConfig& cfg, const QuadOptions& opt) {
    if (net.activation() != Activation::ReLU) throw UnsupportedError("crown-quad needs a ReLU network");
    if (net.depth() < 2) throw UnsupportedError("crown-quad needs at least one hidden layer");
    if (net.depth() == 2 && ball.p == Norm::L1) throw UnsupportedError("crown-quad does not support the l1 ball");
    const Network g = margin_network(net, c, t);
    const SweepResult sweep = layer_sweep(g, ball, opt.linear_lower);
    const QuadraticForm qf = build_quadratic(g, 0, sweep.bounds, ball, Sense::Minimize, opt);
    return pgd_optimize(qf, cfg).value;
}

}  // namespace crown
