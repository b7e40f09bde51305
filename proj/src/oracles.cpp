#include "crown/oracles.hpp"

#include "crown/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crown {

VectorXd sample_ball(const BallSpec& ball, std::mt19937_64& rng) {
    const Eigen::Index n = ball.center.size();
    VectorXd off(n);
    switch (ball.p) {
        case Norm::Linf: {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (Eigen::Index i = 0; i < n; ++i) off(i) = u(rng);
            break;
        }
        case Norm::L2: {
            std::normal_distribution<double> gauss;
            for (Eigen::Index i = 0; i < n; ++i) off(i) = gauss(rng);
            const double len = off.norm();
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double r = std::pow(u(rng), 1.0 / static_cast<double>(n));
            off *= len > 0.0 ? r / len : 0.0;
            break;
        }
        case Norm::L1: {
            // n+1 exponentials normalised by their sum give a uniform point of
            // the simplex; random signs spread it over the cross-polytope.
            std::exponential_distribution<double> ex(1.0);
            std::bernoulli_distribution coin(0.5);
            double total = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                off(i) = ex(rng);
                total += off(i);
            }
            total += ex(rng);
            for (Eigen::Index i = 0; i < n; ++i) off(i) = (coin(rng) ? 1.0 : -1.0) * off(i) / total;
            break;
        }
    }
    return ball.center + ball.radius * off;
}

VectorXd project_ball(const BallSpec& ball, const VectorXd& x) {
    VectorXd off = x - ball.center;
    const double eps = ball.radius;
    switch (ball.p) {
        case Norm::Linf:
            off = off.cwiseMax(-eps).cwiseMin(eps);
            break;
        case Norm::L2: {
            const double n = off.norm();
            if (n > eps) off *= eps / n;
            break;
        }
        case Norm::L1: {
            if (off.cwiseAbs().sum() <= eps) break;
            std::vector<double> mag(off.data(), off.data() + off.size());
            for (double& v : mag) v = std::abs(v);
            std::sort(mag.begin(), mag.end(), std::greater<>());
            double cumsum = 0.0, theta = 0.0;
            for (std::size_t k = 0; k < mag.size(); ++k) {
                cumsum += mag[k];
                const double t = (cumsum - eps) / static_cast<double>(k + 1);
                if (mag[k] > t) theta = t;
            }
            for (Eigen::Index i = 0; i < off.size(); ++i) {
                const double a = std::max(std::abs(off(i)) - theta, 0.0);
                off(i) = std::copysign(a, off(i));
            }
            break;
        }
    }
    return ball.center + off;
}

VectorXd margin_gradient(const Network& net, const VectorXd& x, Eigen::Index c, Eigen::Index t) {
    const std::vector<VectorXd> pre = forward_trace(net, x);
    VectorXd seed = VectorXd::Zero(net.output_dim());
    seed(c) += 1.0;
    seed(t) -= 1.0;
    VectorXd grad = net.layers().back().weight.transpose() * seed;
    for (std::size_t k = net.depth() - 1; k >= 1; --k) {
        const VectorXd& y = pre[k - 1];
        for (Eigen::Index i = 0; i < y.size(); ++i) grad(i) *= activation_eval(net.activation(), y(i)).second;
        grad = net.layer(k - 1).weight.transpose() * grad;
    }
    return grad;
}

FalsifierReport falsify(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball, int n_samples,
                        int attack_iters, std::uint64_t seed) {
    if (ball.center.size() != net.input_dim()) throw ShapeError("ball dimension differs from network input");
    auto margin = [&](const VectorXd& x) {
        const VectorXd f = forward(net, x);
        return f(c) - f(t);
    };

    FalsifierReport rep;
    rep.seed = seed;
    rep.min_margin_found = margin(ball.center);
    rep.witness = ball.center;
    rep.samples_used = 1;
    if (ball.radius == 0.0) return rep;

    std::mt19937_64 rng(seed);
    std::vector<std::pair<double, VectorXd>> pool;
    pool.emplace_back(rep.min_margin_found, ball.center);
    for (int s = 0; s < n_samples; ++s) {
        VectorXd x = sample_ball(ball, rng);
        pool.emplace_back(margin(x), std::move(x));
    }
    rep.samples_used += n_samples;

    constexpr std::size_t kRestarts = 5;
    const std::size_t keep = std::min(kRestarts, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
    rep.min_margin_found = pool.front().first;
    rep.witness = pool.front().second;

    const double step = ball.radius / 10.0;
    for (std::size_t r = 0; r < keep; ++r) {
        VectorXd x = pool[r].second;
        for (int it = 0; it < attack_iters; ++it) {
            const VectorXd g = margin_gradient(net, x, c, t);
            VectorXd dir = VectorXd::Zero(g.size());
            switch (ball.p) {
                case Norm::Linf:
                    dir = g.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
                    break;
                case Norm::L2:
                    if (g.norm() > 0.0) dir = g / g.norm();
                    break;
                case Norm::L1: {
                    Eigen::Index k = 0;
                    g.cwiseAbs().maxCoeff(&k);
                    dir(k) = g(k) > 0.0 ? 1.0 : (g(k) < 0.0 ? -1.0 : 0.0);
                    break;
                }
            }
            if (dir.isZero()) break;
            x = project_ball(ball, x - step * dir);
            const double mval = margin(x);
            if (mval < rep.min_margin_found) {
                rep.min_margin_found = mval;
                rep.witness = x;
            }
            ++rep.attack_iters;
        }
    }
    return rep;
}

GlobalBounds interval_bounds(const Network& net, const BallSpec& ball) {
    if (ball.center.size() != net.input_dim()) throw ShapeError("ball dimension differs from network input");
    const Layer& first = net.layer(0);
    VectorXd radius(first.out_dim());
    for (Eigen::Index i = 0; i < radius.size(); ++i) radius(i) = ball.radius * dual_norm(first.weight.row(i).transpose(), ball.p);
    const VectorXd mid = first.weight * ball.center + first.bias;
    VectorXd lo = mid - radius;
    VectorXd hi = mid + radius;

    for (std::size_t k = 1; k < net.depth(); ++k) {
        const auto act = [&](double v) { return activate(net.activation(), v); };
        const VectorXd h_lo = lo.unaryExpr(act);
        const VectorXd h_hi = hi.unaryExpr(act);
        const Layer& L = net.layer(k);
        const MatrixXd pos = L.weight.cwiseMax(0.0);
        const MatrixXd neg = L.weight.cwiseMin(0.0);
        lo = pos * h_lo + neg * h_hi + L.bias;
        hi = pos * h_hi + neg * h_lo + L.bias;
    }
    return GlobalBounds{std::move(lo), std::move(hi)};
}

GridExtrema grid_exact_bounds(const Network& net, const BallSpec& ball, double resolution) {
    const Eigen::Index n = net.input_dim();
    if (n > 3) throw ValueError("grid enumeration supports at most 3 input dimensions, got " + std::to_string(n));
    if (ball.center.size() != n) throw ShapeError("ball dimension differs from network input");
    if (!(resolution > 0.0)) throw ValueError("grid resolution must be positive");

    const std::size_t per_axis =
        ball.radius > 0.0 ? static_cast<std::size_t>(std::ceil(2.0 * ball.radius / resolution)) + 1 : 1;
    std::size_t total = 1;
    for (Eigen::Index d = 0; d < n; ++d) {
        if (total > kGridBudget / per_axis) throw ValueError("grid exceeds the point budget");
        total *= per_axis;
    }

    const double spacing = per_axis > 1 ? 2.0 * ball.radius / static_cast<double>(per_axis - 1) : 0.0;
    GridExtrema out;
    out.min = VectorXd::Constant(net.output_dim(), std::numeric_limits<double>::infinity());
    out.max = VectorXd::Constant(net.output_dim(), -std::numeric_limits<double>::infinity());
    VectorXd off(n);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (Eigen::Index d = 0; d < n; ++d) {
            off(d) = -ball.radius + spacing * static_cast<double>(rem % per_axis);
            rem /= per_axis;
        }
        const double len = norm_of(off, ball.p);
        if (len > ball.radius) off *= ball.radius / len;
        const VectorXd f = forward(net, ball.center + off);
        out.min = out.min.cwiseMin(f);
        out.max = out.max.cwiseMax(f);
    }
    out.points = total;
    return out;
}

}  // namespace crown
