#include "support.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace crown::testing {

Network random_network(Rng& rng, const std::vector<int>& widths, Activation act, double weight_scale,
                       double bias_scale) {
    std::vector<Layer> layers;
    for (std::size_t k = 1; k < widths.size(); ++k) {
        std::normal_distribution<double> w(0.0, weight_scale / std::sqrt(static_cast<double>(widths[k - 1])));
        std::normal_distribution<double> b(0.0, bias_scale);
        MatrixXd W(widths[k], widths[k - 1]);
        VectorXd B(widths[k]);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = w(rng);
        for (Eigen::Index i = 0; i < B.size(); ++i) B(i) = bias_scale > 0.0 ? b(rng) : 0.0;
        layers.push_back(Layer{W, B});
    }
    return Network(std::move(layers), act);
}

Network center_on(const Network& net, const VectorXd& x0, Rng& rng, double jitter) {
    std::uniform_real_distribution<double> u(-jitter, jitter);
    std::vector<Layer> layers = net.layers();
    VectorXd h = x0;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
        Layer& L = layers[k];
        const VectorXd y = L.weight * h;
        for (Eigen::Index i = 0; i < y.size(); ++i) L.bias(i) = -y(i) + u(rng);
        h = (L.weight * h + L.bias).unaryExpr([&](double v) { return activate(net.activation(), v); });
    }
    return Network(std::move(layers), net.activation());
}

VectorXd random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

std::vector<double> to_std(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

namespace {

double ref_act(Activation act, double y) {
    switch (act) {
        case Activation::ReLU: return std::max(0.0, y);
        case Activation::Tanh: return (1.0 - std::exp(-2.0 * y)) / (1.0 + std::exp(-2.0 * y));
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-y));
        case Activation::Arctan: return std::atan(y);
    }
    return y;
}

double qnorm(const std::vector<double>& a, Norm p) {
    double s = 0.0;
    for (double v : a) {
        if (p == Norm::L1) s = std::max(s, std::abs(v));
        else if (p == Norm::L2) s += v * v;
        else s += std::abs(v);
    }
    return p == Norm::L2 ? std::sqrt(s) : s;
}

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const MatrixXd& m) {
    Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
}

// Bounds of sel * (pre-activation of layer `depth`) given the hidden bounds
// of layers 1..depth-1.
RefBounds fastlin_stage(const Network& net, std::size_t depth, const std::vector<double>& x0, double eps, Norm p,
                        const Mat& sel, const std::vector<std::vector<double>>& lo,
                        const std::vector<std::vector<double>>& hi) {
    const Mat Wtop = to_mat(net.layer(depth - 1).weight);
    const auto& btop = net.layer(depth - 1).bias;
    const std::size_t rows = sel.empty() ? Wtop.size() : sel.size();

    // A: rows x width of the layer below the current one.
    Mat A(rows);
    std::vector<double> bias_u(rows, 0.0), bias_l(rows, 0.0);
    for (std::size_t j = 0; j < rows; ++j) {
        if (sel.empty()) {
            A[j] = Wtop[j];
            bias_u[j] = bias_l[j] = btop(static_cast<Eigen::Index>(j));
        } else {
            A[j].assign(Wtop[0].size(), 0.0);
            for (std::size_t r = 0; r < Wtop.size(); ++r) {
                for (std::size_t c = 0; c < Wtop[0].size(); ++c) A[j][c] += sel[j][r] * Wtop[r][c];
                bias_u[j] += sel[j][r] * btop(static_cast<Eigen::Index>(r));
            }
            bias_l[j] = bias_u[j];
        }
    }
    for (std::size_t k = depth - 1; k >= 1; --k) {
        const auto& l = lo[k - 1];
        const auto& u = hi[k - 1];
        for (std::size_t j = 0; j < rows; ++j) {
            for (std::size_t i = 0; i < l.size(); ++i) {
                double d;
                if (l[i] >= 0.0) d = 1.0;
                else if (u[i] <= 0.0) d = 0.0;
                else {
                    d = u[i] / (u[i] - l[i]);
                    const double t = A[j][i] * d * (-l[i]);
                    if (A[j][i] > 0.0) bias_u[j] += t;
                    if (A[j][i] < 0.0) bias_l[j] += t;
                }
                A[j][i] *= d;
            }
        }
        const Mat W = to_mat(net.layer(k - 1).weight);
        const auto& b = net.layer(k - 1).bias;
        Mat next(rows, std::vector<double>(W[0].size(), 0.0));
        for (std::size_t j = 0; j < rows; ++j) {
            for (std::size_t i = 0; i < W.size(); ++i) {
                bias_u[j] += A[j][i] * b(static_cast<Eigen::Index>(i));
                bias_l[j] += A[j][i] * b(static_cast<Eigen::Index>(i));
                for (std::size_t c = 0; c < W[0].size(); ++c) next[j][c] += A[j][i] * W[i][c];
            }
        }
        A = std::move(next);
    }
    RefBounds out;
    for (std::size_t j = 0; j < rows; ++j) {
        double ax = 0.0;
        for (std::size_t c = 0; c < x0.size(); ++c) ax += A[j][c] * x0[c];
        const double spread = eps * qnorm(A[j], p);
        out.upper.push_back(ax + bias_u[j] + spread);
        out.lower.push_back(ax + bias_l[j] - spread);
    }
    return out;
}

}  // namespace

std::vector<double> reference_forward(const Network& net, const std::vector<double>& x) {
    std::vector<double> h = x;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const Layer& L = net.layer(k);
        std::vector<double> y(static_cast<std::size_t>(L.out_dim()));
        for (Eigen::Index i = 0; i < L.out_dim(); ++i) {
            double s = L.bias(i);
            for (Eigen::Index j = 0; j < L.in_dim(); ++j) s += L.weight(i, j) * h[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(i)] = k + 1 < net.depth() ? ref_act(net.activation(), s) : s;
        }
        h = std::move(y);
    }
    return h;
}

RefBounds fastlin_reference(const Network& net, const std::vector<double>& x0, double eps, Norm p,
                            const std::vector<std::vector<double>>& selector) {
    std::vector<std::vector<double>> lo, hi;
    for (std::size_t k = 1; k < net.depth(); ++k) {
        RefBounds b = fastlin_stage(net, k, x0, eps, p, {}, lo, hi);
        lo.push_back(std::move(b.lower));
        hi.push_back(std::move(b.upper));
    }
    return fastlin_stage(net, net.depth(), x0, eps, p, selector, lo, hi);
}

double linear_max_over_ball(const std::vector<double>& a, const std::vector<double>& x0, double eps, Norm p) {
    std::vector<double> x = x0;
    if (p == Norm::Linf) {
        for (std::size_t i = 0; i < a.size(); ++i) x[i] += eps * (a[i] > 0 ? 1.0 : (a[i] < 0 ? -1.0 : 0.0));
    } else if (p == Norm::L2) {
        double n = 0.0;
        for (double v : a) n += v * v;
        n = std::sqrt(n);
        if (n > 0)
            for (std::size_t i = 0; i < a.size(); ++i) x[i] += eps * a[i] / n;
    } else {
        // Best vertex of the cross-polytope.
        std::size_t best = 0;
        for (std::size_t i = 1; i < a.size(); ++i)
            if (std::abs(a[i]) > std::abs(a[best])) best = i;
        x[best] += eps * (a[best] >= 0 ? 1.0 : -1.0);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
}

std::filesystem::path temp_dir() {
    static const std::filesystem::path dir = [] {
        std::random_device rd;
        auto d = std::filesystem::temp_directory_path() / ("crown-test-" + std::to_string(rd()));
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace crown::testing
