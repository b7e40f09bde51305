#include "crown/model.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace crown {

using json = nlohmann::json;

namespace {

constexpr std::string_view kNetFormat = "crown-net-v1";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    } catch (const json::out_of_range& e) {
        // Literals such as 1e999 overflow to infinity.
        throw ValueError(std::string("non-finite number: ") + e.what());
    }
}

double to_real(const json& v, const char* what) {
    if (!v.is_number()) throw ParseError(std::string(what) + ": expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ValueError(std::string(what) + ": non-finite entry");
    return d;
}

VectorXd to_vector(const json& arr, const char* what) {
    if (!arr.is_array()) throw ParseError(std::string(what) + ": expected an array");
    VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_real(arr[i], what);
    return v;
}

MatrixXd to_matrix(const json& arr) {
    if (!arr.is_array() || arr.empty()) throw ParseError("weight: expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(arr.size());
    if (!arr[0].is_array()) throw ParseError("weight: expected rows to be arrays");
    const auto cols = static_cast<Eigen::Index>(arr[0].size());
    MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = arr[static_cast<std::size_t>(i)];
        if (!row.is_array()) throw ParseError("weight: expected rows to be arrays");
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw ShapeError("weight: ragged rows (row " + std::to_string(i) + ")");
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = to_real(row[static_cast<std::size_t>(j)], "weight");
    }
    return w;
}

}  // namespace

std::string_view to_string(Activation act) {
    switch (act) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Arctan: return "arctan";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "arctan") return Activation::Arctan;
    throw ParseError("unknown activation '" + std::string(name) + "'");
}

Network::Network(std::vector<Layer> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const Layer& L = layers_[k];
        if (L.weight.rows() == 0 || L.weight.cols() == 0)
            throw ShapeError("layer " + std::to_string(k + 1) + ": empty weight matrix");
        if (L.bias.size() != L.weight.rows())
            throw ShapeError("layer " + std::to_string(k + 1) + ": bias length " + std::to_string(L.bias.size()) +
                             " does not match " + std::to_string(L.weight.rows()) + " rows");
        if (k > 0 && L.weight.cols() != layers_[k - 1].weight.rows())
            throw ShapeError("layer " + std::to_string(k + 1) + ": expects " + std::to_string(L.weight.cols()) +
                             " inputs but previous layer has " + std::to_string(layers_[k - 1].weight.rows()));
        if (!L.weight.allFinite() || !L.bias.allFinite())
            throw ValueError("layer " + std::to_string(k + 1) + ": non-finite entry");
    }
}

Eigen::Index Network::width(std::size_t k) const {
    if (k == 0) return input_dim();
    return layers_.at(k - 1).out_dim();
}

Network parse_network(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_object()) throw ParseError("network file: expected an object");
    if (doc.value("format", std::string{}) != kNetFormat)
        throw ParseError("network file: format must be \"" + std::string(kNetFormat) + "\"");
    if (!doc.contains("activation") || !doc["activation"].is_string())
        throw ParseError("network file: missing activation");
    const Activation act = parse_activation(doc["activation"].get<std::string>());
    if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
        throw ParseError("network file: missing layers");

    const json& jl = doc["layers"];
    std::vector<Layer> layers;
    layers.reserve(jl.size());
    for (std::size_t k = 0; k < jl.size(); ++k) {
        const json& obj = jl[k];
        if (!obj.is_object() || !obj.contains("weight") || !obj.contains("bias"))
            throw ParseError("layer " + std::to_string(k + 1) + ": needs weight and bias");
        if (obj.contains("activation")) {
            const json& a = obj["activation"];
            if (k + 1 == jl.size()) {
                if (!(a.is_null() || a == "linear" || a == "none"))
                    throw ValueError("last layer must be affine; trailing activation rejected");
            } else if (!a.is_string() || parse_activation(a.get<std::string>()) != act) {
                throw ValueError("layer " + std::to_string(k + 1) + ": per-layer activations are not supported");
            }
        }
        layers.push_back(Layer{to_matrix(obj["weight"]), to_vector(obj["bias"], "bias")});
    }
    return Network(std::move(layers), act);
}

Network load_network(const std::filesystem::path& path) { return parse_network(read_file(path)); }

std::string serialize_network(const Network& net) {
    json doc;
    doc["format"] = kNetFormat;
    doc["activation"] = to_string(net.activation());
    json layers = json::array();
    for (const Layer& L : net.layers()) {
        json w = json::array();
        for (Eigen::Index i = 0; i < L.weight.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < L.weight.cols(); ++j) row.push_back(L.weight(i, j));
            w.push_back(std::move(row));
        }
        json b = json::array();
        for (Eigen::Index i = 0; i < L.bias.size(); ++i) b.push_back(L.bias(i));
        layers.push_back({{"weight", std::move(w)}, {"bias", std::move(b)}});
    }
    doc["layers"] = std::move(layers);
    return doc.dump();
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path.string());
    out << serialize_network(net);
}

std::vector<LabeledPoint> parse_points(std::string_view text) {
    const json doc = parse_json(text);
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array())
        throw ParseError("points file: expected {\"points\": [...]}");
    std::vector<LabeledPoint> out;
    for (const json& p : doc["points"]) {
        if (!p.is_object() || !p.contains("x")) throw ParseError("points file: each point needs x");
        LabeledPoint lp;
        if (p.contains("id") && !p["id"].is_string()) throw ParseError("points file: id must be a string");
        lp.id = p.contains("id") ? p["id"].get<std::string>() : std::to_string(out.size());
        lp.x = to_vector(p["x"], "x");
        if (p.contains("label") && !p["label"].is_null()) {
            if (!p["label"].is_number_integer()) throw ParseError("points file: label must be an integer");
            lp.label = p["label"].get<int>();
        }
        out.push_back(std::move(lp));
    }
    return out;
}

std::vector<LabeledPoint> load_points(const std::filesystem::path& path) { return parse_points(read_file(path)); }

double activate(Activation act, double y) {
    switch (act) {
        case Activation::ReLU: return y > 0.0 ? y : 0.0;
        case Activation::Tanh: return std::tanh(y);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-y));
        case Activation::Arctan: return std::atan(y);
    }
    return y;
}

std::vector<VectorXd> forward_trace(const Network& net, const VectorXd& x) {
    if (x.size() != net.input_dim())
        throw ShapeError("input has length " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(net.input_dim()));
    std::vector<VectorXd> pre;
    pre.reserve(net.depth());
    VectorXd h = x;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const Layer& L = net.layer(k);
        VectorXd y = L.weight * h + L.bias;
        if (k + 1 < net.depth()) h = y.unaryExpr([&](double v) { return activate(net.activation(), v); });
        pre.push_back(std::move(y));
    }
    return pre;
}

VectorXd forward(const Network& net, const VectorXd& x) { return std::move(forward_trace(net, x).back()); }

Eigen::Index argmax(const VectorXd& v) {
    Eigen::Index best = 0;
    v.maxCoeff(&best);
    return best;
}

Network margin_network(const Network& net, Eigen::Index c, Eigen::Index t) {
    const Eigen::Index n = net.output_dim();
    if (c < 0 || c >= n || t < 0 || t >= n) throw ValueError("class index out of range");
    if (c == t) throw ValueError("margin network needs distinct classes");
    std::vector<Layer> layers = net.layers();
    Layer& last = layers.back();
    MatrixXd w = last.weight.row(c) - last.weight.row(t);
    VectorXd b(1);
    b(0) = last.bias(c) - last.bias(t);
    last = Layer{std::move(w), std::move(b)};
    return Network(std::move(layers), net.activation());
}

Network truncate(const Network& net, std::size_t k) {
    if (k == 0 || k > net.depth()) throw ValueError("truncation depth out of range");
    std::vector<Layer> layers(net.layers().begin(), net.layers().begin() + static_cast<std::ptrdiff_t>(k));
    return Network(std::move(layers), net.activation());
}

}  // namespace crown
