#include "crown/certify.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

namespace crown {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::FastLin: return "fastlin";
        case Method::CrownAda: return "crown-ada";
        case Method::CrownGeneral: return "crown-general";
        case Method::CrownQuad: return "crown-quad";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    if (text == "fastlin") return Method::FastLin;
    if (text == "crown-ada") return Method::CrownAda;
    if (text == "crown-general") return Method::CrownGeneral;
    if (text == "crown-quad") return Method::CrownQuad;
    throw ValueError("unknown method '" + std::string(text) + "'");
}

void check_method(Method m, Activation act) {
    if (m == Method::CrownGeneral || act == Activation::ReLU) return;
    throw UnsupportedError("method " + std::string(to_string(m)) + " requires a relu network, got " +
                           std::string(to_string(act)));
}

double certify_margin(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball, Method method,
                      const PgdConfig& pgd) {
    check_method(method, net.activation());
    if (method == Method::CrownQuad) return crown_quad_margin(net, c, t, ball, pgd);
    const Network g = margin_network(net, c, t);
    const auto strategy = method == Method::FastLin ? ReluLowerStrategy::FastLin : ReluLowerStrategy::Adaptive;
    return output_bounds(g, ball, strategy).lower(0);
}

CertificationResult radius_targeted(const Network& net, const VectorXd& x0, Eigen::Index c, Eigen::Index t, Norm p,
                                    Method method, const SearchConfig& cfg) {
    if (!(cfg.eps_init > 0.0) || !(cfg.rel_tol > 0.0 && cfg.rel_tol < 1.0) || cfg.max_doublings <= 0 ||
        cfg.max_bisections <= 0)
        throw ValueError("invalid search configuration");
    check_method(method, net.activation());
    const auto start = std::chrono::steady_clock::now();

    CertificationResult res;
    res.target = t;
    res.method = method;
    res.p = p;

    auto finish = [&](double radius) {
        res.radius = radius;
        res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return res;
    };
    auto probe = [&](double eps) {
        const double margin = certify_margin(net, c, t, BallSpec{x0, eps, p}, method, cfg.pgd);
        res.trace.push_back({eps, margin});
        ++res.iterations;
        return margin > 0.0;
    };

    // At the point itself the margin is exact.
    const VectorXd logits = forward(net, x0);
    if (c < 0 || c >= logits.size() || t < 0 || t >= logits.size() || c == t)
        throw ValueError("invalid class pair");
    const double m0 = logits(c) - logits(t);
    res.trace.push_back({0.0, m0});
    if (!(m0 > 0.0)) return finish(0.0);

    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double eps = cfg.eps_init;
    if (probe(eps)) {
        lo = eps;
        for (int i = 0; i < cfg.max_doublings; ++i) {
            eps *= 2.0;
            if (probe(eps)) {
                lo = eps;
            } else {
                hi = eps;
                break;
            }
        }
        if (std::isinf(hi)) {
            res.capped = true;
            return finish(lo);
        }
    } else {
        hi = eps;
        for (int i = 0; i < cfg.max_doublings; ++i) {
            eps *= 0.5;
            if (probe(eps)) {
                lo = eps;
                break;
            }
            hi = eps;
        }
        if (lo == 0.0) return finish(0.0);
    }

    for (int i = 0; i < cfg.max_bisections && (hi - lo) / hi > cfg.rel_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid))
            lo = mid;
        else
            hi = mid;
    }

    // Every certified probe must sit at or below lo and every failed one at or
    // above hi; anything else means the margin was not monotone in eps.
    for (const Probe& pr : res.trace) {
        if ((pr.margin > 0.0 && pr.eps > lo) || (!(pr.margin > 0.0) && pr.eps < hi))
            throw std::logic_error("certified margin is not monotone in eps (probe at " + std::to_string(pr.eps) +
                                   ")");
    }
    return finish(lo);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

UntargetedResult radius_untargeted(const Network& net, const VectorXd& x0, Eigen::Index c, Norm p, Method method,
                                   const SearchConfig& cfg, int jobs) {
    const Eigen::Index n = net.output_dim();
    if (n < 2) throw ValueError("untargeted certification needs at least two classes");
    std::vector<Eigen::Index> targets;
    for (Eigen::Index t = 0; t < n; ++t)
        if (t != c) targets.push_back(t);

    UntargetedResult out;
    out.per_target.resize(targets.size());
    parallel_for(targets.size(), jobs,
                 [&](std::size_t i) { out.per_target[i] = radius_targeted(net, x0, c, targets[i], p, method, cfg); });

    out.radius = std::numeric_limits<double>::infinity();
    for (const auto& r : out.per_target) {
        if (r.radius < out.radius) {
            out.radius = r.radius;
            out.worst_target = r.target;
        }
    }
    return out;
}

Eigen::Index select_target(const Network& net, const VectorXd& x0, TargetMode mode, std::uint64_t seed) {
    const VectorXd logits = forward(net, x0);
    const Eigen::Index n = logits.size();
    if (n < 2) throw ValueError("target selection needs at least two classes");
    const Eigen::Index c = argmax(logits);

    if (mode == TargetMode::Random) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 2);
        const Eigen::Index k = pick(rng);
        return k >= c ? k + 1 : k;
    }
    Eigen::Index best = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
        if (t == c) continue;
        if (best < 0 || (mode == TargetMode::RunnerUp ? logits(t) > logits(best) : logits(t) < logits(best))) best = t;
    }
    return best;
}

}  // namespace crown
