#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "crown/model.hpp"
#include "support.hpp"

using namespace crown;
using namespace crown::testing;

namespace {

const char* kTwoLayerRelu = R"({
  "format": "crown-net-v1", "activation": "relu",
  "layers": [
    {"weight": [[1.0, -1.0], [0.5, 2.0], [-1.5, 0.25]], "bias": [0.1, -0.2, 0.0]},
    {"weight": [[1.0, 0.0, -1.0], [0.0, 1.0, 1.0]], "bias": [0.0, 0.5]}
  ]})";

}  // namespace

TEST_CASE("parse a 2-3-2 relu network") {
    const Network net = parse_network(kTwoLayerRelu);
    CHECK(net.depth() == 2);
    CHECK(net.input_dim() == 2);
    CHECK(net.width(1) == 3);
    CHECK(net.output_dim() == 2);
    CHECK(net.activation() == Activation::ReLU);
    CHECK(net.layer(0).weight(2, 1) == 0.25);
    CHECK(net.layer(1).bias(1) == 0.5);
}

TEST_CASE("activation names map onto the enum") {
    for (const auto& [name, act] : {std::pair{"relu", Activation::ReLU}, std::pair{"tanh", Activation::Tanh},
                                    std::pair{"sigmoid", Activation::Sigmoid}, std::pair{"arctan", Activation::Arctan}}) {
        std::string text = kTwoLayerRelu;
        text.replace(text.find("\"relu\""), 6, std::string("\"") + name + "\"");
        CHECK(parse_network(text).activation() == act);
    }
    std::string bad = kTwoLayerRelu;
    bad.replace(bad.find("\"relu\""), 6, "\"softplus\"");
    CHECK_THROWS_AS(parse_network(bad), ParseError);
}

TEST_CASE("loader rejects malformed, inconsistent and non-finite files") {
    CHECK_THROWS_AS(parse_network("{not json"), ParseError);
    CHECK_THROWS_AS(parse_network(R"({"format": "other", "activation": "relu", "layers": []})"), ParseError);
    // Second layer rows have 2 entries but the first layer has 3 outputs.
    CHECK_THROWS_AS(parse_network(R"({"format": "crown-net-v1", "activation": "relu", "layers": [
        {"weight": [[1, 0], [0, 1], [1, 1]], "bias": [0, 0, 0]},
        {"weight": [[1, 0]], "bias": [0]}]})"),
                    ShapeError);
    CHECK_THROWS_AS(parse_network(R"({"format": "crown-net-v1", "activation": "relu", "layers": [
        {"weight": [[1, 0], [0]], "bias": [0, 0]}]})"),
                    ShapeError);
    CHECK_THROWS_AS(parse_network(R"({"format": "crown-net-v1", "activation": "relu", "layers": [
        {"weight": [[1, 0]], "bias": [0, 0]}]})"),
                    ShapeError);
    CHECK_THROWS_AS(parse_network(R"({"format": "crown-net-v1", "activation": "relu", "layers": [
        {"weight": [[1, 1e999]], "bias": [0]}]})"),
                    ValueError);
    CHECK_THROWS_AS(parse_network(R"({"format": "crown-net-v1", "activation": "relu", "layers": [
        {"weight": [[1, 0]], "bias": [0], "activation": "relu"}]})"),
                    ValueError);
    // Truncated export.
    const std::string text = kTwoLayerRelu;
    CHECK_THROWS_AS(parse_network(text.substr(0, text.size() / 2)), ParseError);
}

TEST_CASE("constructor validates finiteness") {
    MatrixXd w(1, 1);
    w << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Network({Layer{w, VectorXd::Zero(1)}}, Activation::ReLU), ValueError);
}

TEST_CASE("forward on hand-evaluated networks") {
    const Network id({Layer{MatrixXd::Identity(2, 2), VectorXd::Zero(2)}}, Activation::ReLU);
    VectorXd x(2);
    x << 0.3, -0.7;
    CHECK(forward(id, x) == x);

    MatrixXd w1(2, 1), w2(1, 2);
    w1 << 1, -1;
    w2 << 1, 1;
    const Network relu({Layer{w1, VectorXd::Zero(2)}, Layer{w2, VectorXd::Zero(1)}}, Activation::ReLU);
    VectorXd two(1);
    two << 2.0;
    CHECK(forward(relu, two)(0) == doctest::Approx(2.0));

    CHECK_THROWS_AS(forward(relu, x), ShapeError);
}

TEST_CASE("forward agrees with a straight-line evaluator") {
    Rng rng(11);
    for (Activation act : {Activation::Tanh, Activation::ReLU, Activation::Sigmoid, Activation::Arctan}) {
        for (int rep = 0; rep < 10; ++rep) {
            const Network net = random_network(rng, {5, 8, 7, 3}, act, 1.5, 0.5);
            const VectorXd x = random_vector(rng, 5, -2.0, 2.0);
            const VectorXd f = forward(net, x);
            const std::vector<double> ref = reference_forward(net, to_std(x));
            for (Eigen::Index j = 0; j < f.size(); ++j) CHECK(std::abs(f(j) - ref[j]) < 1e-12);
        }
    }
}

TEST_CASE("forward stays finite for moderate inputs") {
    Rng rng(5);
    for (Activation act : {Activation::Tanh, Activation::ReLU, Activation::Sigmoid, Activation::Arctan}) {
        const Network net = random_network(rng, {4, 16, 16, 2}, act, 3.0, 1.0);
        for (int rep = 0; rep < 50; ++rep) CHECK(forward(net, random_vector(rng, 4, -1e3, 1e3)).allFinite());
    }
}

TEST_CASE("margin network subtracts the last-layer rows") {
    MatrixXd w1 = MatrixXd::Identity(2, 2);
    MatrixXd w2 = MatrixXd::Identity(2, 2);
    VectorXd b2(2);
    b2 << 0.5, -0.5;
    const Network net({Layer{w1, VectorXd::Zero(2)}, Layer{w2, b2}}, Activation::ReLU);
    const Network g = margin_network(net, 0, 1);
    CHECK(g.output_dim() == 1);
    CHECK(g.layer(1).weight(0, 0) == 1.0);
    CHECK(g.layer(1).weight(0, 1) == -1.0);
    CHECK(g.layer(1).bias(0) == 1.0);
    CHECK_THROWS_AS(margin_network(net, 1, 1), ValueError);
    CHECK_THROWS_AS(margin_network(net, 0, 2), ValueError);
}

TEST_CASE("margin network composes with forward") {
    Rng rng(3);
    const Network net = random_network(rng, {4, 10, 10, 5}, Activation::Tanh, 1.0, 0.3);
    const Network g = margin_network(net, 2, 4);
    for (int rep = 0; rep < 100; ++rep) {
        const VectorXd x = random_vector(rng, 4, -3.0, 3.0);
        const VectorXd f = forward(net, x);
        CHECK(std::abs(forward(g, x)(0) - (f(2) - f(4))) < 1e-12);
    }
}

TEST_CASE("save then load reproduces weights bit-exactly") {
    Rng rng(21);
    for (Activation act : {Activation::ReLU, Activation::Arctan}) {
        const Network net = random_network(rng, {3, 6, 4}, act, 1.0, 1.0);
        const auto path = temp_dir() / "roundtrip.json";
        save_network(net, path);
        const Network back = load_network(path);
        CHECK(back.activation() == act);
        REQUIRE(back.depth() == net.depth());
        for (std::size_t k = 0; k < net.depth(); ++k) {
            CHECK(back.layer(k).weight == net.layer(k).weight);
            CHECK(back.layer(k).bias == net.layer(k).bias);
        }
    }
}

TEST_CASE("points file") {
    const auto pts = parse_points(R"({"points": [{"id": "a", "x": [1, 2], "label": 1}, {"id": "b", "x": [0.5, 0]}]})");
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].id == "a");
    CHECK(pts[0].label == 1);
    CHECK(!pts[1].label.has_value());
    CHECK(pts[1].x(0) == 0.5);
    CHECK_THROWS_AS(parse_points(R"({"pts": []})"), ParseError);
    CHECK_THROWS_AS(parse_points(R"({"points": [{"id": "a", "x": [1], "label": 0.5}]})"), ParseError);
}

TEST_CASE("truncate keeps the prefix") {
    Rng rng(1);
    const Network net = random_network(rng, {3, 5, 4, 2}, Activation::ReLU);
    const Network t = truncate(net, 2);
    CHECK(t.depth() == 2);
    CHECK(t.output_dim() == 4);
    const VectorXd x = random_vector(rng, 3);
    CHECK((forward(t, x) - forward_trace(net, x)[1]).norm() == 0.0);
}
