#pragma once

#include "crown/model.hpp"
#include "crown/propagation.hpp"
#include "crown/quad.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace crown {

enum class Method { FastLin, CrownAda, CrownGeneral, CrownQuad };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

/// Throws UnsupportedError when the method cannot run on `act`.
void check_method(Method m, Activation act);

struct SearchConfig {
    double eps_init = 0.05;
    double rel_tol = 1e-3;
    int max_doublings = 20;
    int max_bisections = 40;
    PgdConfig pgd{};
};

struct Probe {
    double eps;
    double margin;
};

struct CertificationResult {
    std::string point_id;
    Eigen::Index target = -1;
    Method method = Method::CrownAda;
    Norm p = Norm::Linf;
    double radius = 0.0;
    int iterations = 0;
    std::vector<Probe> trace;
    double wall_ms = 0.0;
    /// The doubling phase hit max_doublings with the margin still positive.
    bool capped = false;
};

struct UntargetedResult {
    double radius = 0.0;
    Eigen::Index worst_target = -1;
    std::vector<CertificationResult> per_target;
};

/// Lower bound on f_c(x) - f_t(x) over the ball (centre = x0), computed on
/// the margin network.
double certify_margin(const Network& net, Eigen::Index c, Eigen::Index t, const BallSpec& ball, Method method,
                      const PgdConfig& pgd = {});

/// Largest radius (within rel_tol) at which certify_margin stays positive.
CertificationResult radius_targeted(const Network& net, const VectorXd& x0, Eigen::Index c, Eigen::Index t, Norm p,
                                    Method method, const SearchConfig& cfg = {});

/// Minimum of radius_targeted over all t != c. `jobs` > 1 runs targets on
/// worker threads; results do not depend on it.
UntargetedResult radius_untargeted(const Network& net, const VectorXd& x0, Eigen::Index c, Norm p, Method method,
                                   const SearchConfig& cfg = {}, int jobs = 1);

enum class TargetMode { RunnerUp, Random, Least };

Eigen::Index select_target(const Network& net, const VectorXd& x0, TargetMode mode, std::uint64_t seed = 0);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace crown
