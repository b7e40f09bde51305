#pragma once

#include "crown/errors.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crown {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { ReLU, Tanh, Sigmoid, Arctan };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

/// One affine stage. weight(i, j) multiplies neuron j of the previous layer
/// into neuron i of this layer.
struct Layer {
    MatrixXd weight;
    VectorXd bias;

    Eigen::Index out_dim() const { return weight.rows(); }
    Eigen::Index in_dim() const { return weight.cols(); }
};

/// Dense feed-forward network f(x) = W_m phi_{m-1}(x) + b_m with
/// phi_k(x) = act(W_k phi_{k-1}(x) + b_k). The last layer never carries an
/// activation. Immutable once constructed.
class Network {
public:
    Network(std::vector<Layer> layers, Activation activation);

    const std::vector<Layer>& layers() const { return layers_; }
    const Layer& layer(std::size_t k) const { return layers_.at(k); }
    std::size_t depth() const { return layers_.size(); }
    Activation activation() const { return activation_; }
    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }
    /// Width of layer k counted from 0 (input) to depth().
    Eigen::Index width(std::size_t k) const;

private:
    std::vector<Layer> layers_;
    Activation activation_;
};

struct LabeledPoint {
    std::string id;
    VectorXd x;
    std::optional<int> label;
};

Network load_network(const std::filesystem::path& path);
Network parse_network(std::string_view text);
void save_network(const Network& net, const std::filesystem::path& path);
std::string serialize_network(const Network& net);

std::vector<LabeledPoint> load_points(const std::filesystem::path& path);
std::vector<LabeledPoint> parse_points(std::string_view text);

double activate(Activation act, double y);

VectorXd forward(const Network& net, const VectorXd& x);

/// Pre-activation vectors y_1..y_{m-1} followed by the output f(x).
std::vector<VectorXd> forward_trace(const Network& net, const VectorXd& x);

Eigen::Index argmax(const VectorXd& v);

/// Same hidden layers; the last layer becomes the single row W_c - W_t with
/// bias b_c - b_t, so the output is f_c(x) - f_t(x).
Network margin_network(const Network& net, Eigen::Index c, Eigen::Index t);

/// Copy of the first `k` layers with the activation of layer k dropped, i.e.
/// the network whose output is the pre-activation of layer k.
Network truncate(const Network& net, std::size_t k);

}  // namespace crown
