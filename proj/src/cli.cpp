#include "crown/cli.hpp"

#include "crown/certify.hpp"
#include "crown/model.hpp"
#include "crown/propagation.hpp"
#include "crown/quad.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace crown::cli {

using json = nlohmann::json;

namespace {

struct CommonFlags {
    std::string network;
    std::string inputs;
    std::string norm = "inf";
    std::string output;
    int jobs = 1;
};

struct CertifyFlags {
    std::string method = "crown-ada";
    std::string methods;
    std::string target = "runner-up";
    double tol = 1e-3;
    double eps_init = 0.05;
    std::uint64_t seed = 0;
};

struct BoundsFlags {
    std::string method = "crown-ada";
    double eps = 0.0;
};

/// Exit with a specific code and message.
struct Failure {
    int code;
    std::string message;
};

std::string digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::uint64_t h = 1469598103934665603ULL;
    char ch;
    while (in.get(ch)) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    std::ostringstream ss;
    ss << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

void write_atomic(const std::string& path, const std::string& text) {
    const std::filesystem::path dst(path);
    std::filesystem::path tmp = dst;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Failure{kFileError, "cannot write " + tmp.string()};
        out << text << '\n';
        out.flush();
        if (!out) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw Failure{kFileError, "failed writing " + tmp.string()};
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, dst, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Failure{kFileError, "cannot move report into place at " + path};
    }
}

json vector_json(const VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

std::vector<Method> parse_method_list(const std::string& csv) {
    std::vector<Method> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const Method m = parse_method(item);
            if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
        } catch (const ValueError& e) {
            throw Failure{kBadFlags, e.what()};
        }
    }
    if (out.empty()) throw Failure{kBadFlags, "no methods given"};
    return out;
}

struct Loaded {
    Network net;
    std::vector<LabeledPoint> points;
    Norm norm;
};

Loaded load_inputs(const CommonFlags& f) {
    Norm norm;
    try {
        norm = parse_norm(f.norm);
    } catch (const ValueError& e) {
        throw Failure{kBadFlags, e.what()};
    }
    try {
        Network net = load_network(f.network);
        std::vector<LabeledPoint> points = load_points(f.inputs);
        for (const auto& p : points) {
            if (p.x.size() != net.input_dim())
                throw ShapeError("point '" + p.id + "' has length " + std::to_string(p.x.size()) +
                                 ", network expects " + std::to_string(net.input_dim()));
            if (p.label && (*p.label < 0 || *p.label >= net.output_dim()))
                throw ValueError("point '" + p.id + "' has label out of range");
        }
        return Loaded{std::move(net), std::move(points), norm};
    } catch (const Error& e) {
        throw Failure{kFileError, e.what()};
    } catch (const nlohmann::json::exception& e) {
        throw Failure{kFileError, e.what()};
    }
}

void check_compatible(const std::vector<Method>& methods, const Network& net, Norm norm) {
    for (Method m : methods) {
        try {
            check_method(m, net.activation());
        } catch (const UnsupportedError& e) {
            throw Failure{kIncompatible, e.what()};
        }
        if (m == Method::CrownQuad && net.depth() < 2)
            throw Failure{kIncompatible, "crown-quad requires at least one hidden layer"};
        if (m == Method::CrownQuad && net.depth() == 2 && norm == Norm::L1)
            throw Failure{kIncompatible, "crown-quad does not support --norm 1 on two-layer networks"};
    }
}

json report_header(const std::string& command, const CommonFlags& f) {
    json r;
    r["format"] = kReportFormat;
    r["tool_version"] = kToolVersion;
    r["command"] = command;
    r["network"] = {{"path", f.network}, {"digest", digest_file(f.network)}};
    r["inputs"] = f.inputs;
    r["norm"] = f.norm;
    return r;
}

std::vector<Eigen::Index> resolve_targets(const std::string& mode, const Network& net, const VectorXd& x,
                                          Eigen::Index predicted, std::uint64_t seed, std::size_t index) {
    if (mode == "all") {
        std::vector<Eigen::Index> out;
        for (Eigen::Index t = 0; t < net.output_dim(); ++t)
            if (t != predicted) out.push_back(t);
        return out;
    }
    if (mode == "runner-up") return {select_target(net, x, TargetMode::RunnerUp)};
    if (mode == "least") return {select_target(net, x, TargetMode::Least)};
    if (mode == "random") {
        // Per-point stream derived from the user seed and the input position.
        const std::uint64_t mixed = seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(index);
        return {select_target(net, x, TargetMode::Random, mixed)};
    }
    const Eigen::Index t = std::stol(mode);
    if (t == predicted) return {};
    return {t};
}

void validate_target_flag(const std::string& mode, const Network& net) {
    if (mode == "all" || mode == "runner-up" || mode == "least" || mode == "random") {
        if (net.output_dim() < 2) throw Failure{kBadFlags, "network has a single output; nothing to target"};
        return;
    }
    std::size_t used = 0;
    long t = -1;
    try {
        t = std::stol(mode, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != mode.size() || t < 0 || t >= net.output_dim())
        throw Failure{kBadFlags, "--target must be runner-up, random, least, all or a class index below " +
                                     std::to_string(net.output_dim())};
}

int run_certify(const std::string& command, const CommonFlags& f, const CertifyFlags& cf,
                const std::vector<Method>& methods, std::ostream& out, std::ostream& err) {
    if (!(cf.tol > 0.0 && cf.tol < 1.0)) throw Failure{kBadFlags, "--tol must lie in (0, 1)"};
    if (!(cf.eps_init > 0.0)) throw Failure{kBadFlags, "--eps-init must be positive"};
    if (f.jobs < 1) throw Failure{kBadFlags, "--jobs must be at least 1"};
    const Loaded in = load_inputs(f);
    check_compatible(methods, in.net, in.norm);
    validate_target_flag(cf.target, in.net);

    SearchConfig scfg;
    scfg.rel_tol = cf.tol;
    scfg.eps_init = cf.eps_init;

    std::vector<json> records(in.points.size());
    parallel_for(in.points.size(), f.jobs, [&](std::size_t i) {
        const LabeledPoint& pt = in.points[i];
        const VectorXd logits = forward(in.net, pt.x);
        const Eigen::Index predicted = argmax(logits);
        json rec;
        rec["id"] = pt.id;
        rec["label"] = pt.label ? json(*pt.label) : json(nullptr);
        rec["predicted"] = predicted;
        rec["targets"] = json::array();
        json radius = json::object();
        if (pt.label && *pt.label != predicted) {
            rec["skipped"] = true;
            rec["reason"] = "misclassified";
            for (Method m : methods) radius[std::string(to_string(m))] = 0.0;
            rec["radius"] = std::move(radius);
            records[i] = std::move(rec);
            return;
        }
        const auto targets = resolve_targets(cf.target, in.net, pt.x, predicted, cf.seed, i);
        if (targets.empty()) {
            rec["skipped"] = true;
            rec["reason"] = "target equals predicted class";
            for (Method m : methods) radius[std::string(to_string(m))] = 0.0;
            rec["radius"] = std::move(radius);
            records[i] = std::move(rec);
            return;
        }
        rec["skipped"] = false;
        json comparison = json::array();
        std::map<Method, double> best;
        for (Eigen::Index t : targets) {
            std::map<Method, double> per_method;
            for (Method m : methods) {
                CertificationResult r = radius_targeted(in.net, pt.x, predicted, t, in.norm, m, scfg);
                rec["targets"].push_back({{"target", t},
                                          {"method", to_string(m)},
                                          {"norm", to_string(in.norm)},
                                          {"radius", r.radius},
                                          {"iterations", r.iterations},
                                          {"capped", r.capped},
                                          {"time_ms", r.wall_ms}});
                per_method[m] = r.radius;
                auto it = best.find(m);
                if (it == best.end() || r.radius < it->second) best[m] = r.radius;
            }
            if (command == "compare") {
                json radii = json::object(), improvement = json::object();
                for (Method m : methods) radii[std::string(to_string(m))] = per_method[m];
                const auto fl = per_method.find(Method::FastLin);
                if (fl != per_method.end() && fl->second > 0.0) {
                    for (Method m : methods)
                        if (m != Method::FastLin)
                            improvement[std::string(to_string(m))] = (per_method[m] - fl->second) / fl->second;
                }
                comparison.push_back({{"target", t}, {"radii", radii}, {"improvement", improvement}});
            }
        }
        for (Method m : methods) radius[std::string(to_string(m))] = best[m];
        rec["radius"] = std::move(radius);
        if (command == "compare") rec["comparison"] = std::move(comparison);
        records[i] = std::move(rec);
    });

    json report = report_header(command, f);
    json mnames = json::array();
    for (Method m : methods) mnames.push_back(to_string(m));
    report["methods"] = mnames;
    report["target_mode"] = cf.target;
    report["seed"] = cf.seed;
    report["tol"] = cf.tol;
    report["records"] = records;

    // Aggregates: mean of each record's radius over certified (non-skipped)
    // points, and mean wall time per target search.
    json agg;
    std::size_t used = 0, skipped = 0;
    std::map<Method, double> sum_r, sum_t;
    std::map<Method, std::size_t> n_t;
    for (const json& rec : records) {
        if (rec["skipped"].get<bool>()) {
            ++skipped;
            continue;
        }
        ++used;
        for (Method m : methods) sum_r[m] += rec["radius"][std::string(to_string(m))].get<double>();
        for (const json& tr : rec["targets"]) {
            const Method m = parse_method(tr["method"].get<std::string>());
            sum_t[m] += tr["time_ms"].get<double>();
            ++n_t[m];
        }
    }
    json mean_r = json::object(), mean_t = json::object(), improvement = json::object();
    for (Method m : methods) {
        const std::string key(to_string(m));
        mean_r[key] = used ? sum_r[m] / static_cast<double>(used) : 0.0;
        mean_t[key] = n_t[m] ? sum_t[m] / static_cast<double>(n_t[m]) : 0.0;
    }
    if (command == "compare" && sum_r.count(Method::FastLin) && sum_r[Method::FastLin] > 0.0) {
        for (Method m : methods)
            if (m != Method::FastLin)
                improvement[std::string(to_string(m))] = (sum_r[m] - sum_r[Method::FastLin]) / sum_r[Method::FastLin];
    }
    agg["points"] = records.size();
    agg["certified_points"] = used;
    agg["skipped"] = skipped;
    agg["mean_radius"] = mean_r;
    agg["mean_time_ms"] = mean_t;
    if (command == "compare") agg["improvement_vs_fastlin"] = improvement;
    report["aggregate"] = agg;

    if (!f.output.empty()) write_atomic(f.output, report.dump(2));
    else out << report.dump(2) << '\n';

    std::ostream& summary = f.output.empty() ? err : out;
    summary << command << ": " << records.size() << " points (" << skipped << " skipped), norm " << f.norm << '\n';
    summary << std::left << std::setw(16) << "method" << std::setw(16) << "mean radius" << "mean ms/target" << '\n';
    for (Method m : methods) {
        const std::string key(to_string(m));
        summary << std::left << std::setw(16) << key << std::setw(16) << mean_r[key].get<double>()
                << mean_t[key].get<double>() << '\n';
    }
    if (command == "compare") {
        for (auto& [key, val] : improvement.items())
            summary << "improvement " << key << " vs fastlin: " << std::showpos << 100.0 * val.get<double>()
                    << std::noshowpos << "%\n";
    }
    return kOk;
}

int run_bounds(const CommonFlags& f, const BoundsFlags& bf, std::ostream& out, std::ostream& err) {
    if (!(bf.eps >= 0.0)) throw Failure{kBadFlags, "--eps must be non-negative"};
    if (f.jobs < 1) throw Failure{kBadFlags, "--jobs must be at least 1"};
    Method method;
    try {
        method = parse_method(bf.method);
    } catch (const ValueError& e) {
        throw Failure{kBadFlags, e.what()};
    }
    const Loaded in = load_inputs(f);
    check_compatible({method}, in.net, in.norm);

    std::vector<json> records(in.points.size());
    parallel_for(in.points.size(), f.jobs, [&](std::size_t i) {
        const LabeledPoint& pt = in.points[i];
        const auto start = std::chrono::steady_clock::now();
        const BallSpec ball{pt.x, bf.eps, in.norm};
        GlobalBounds gb;
        if (method == Method::CrownQuad) {
            const SweepResult sweep = layer_sweep(in.net, ball, ReluLowerStrategy::Adaptive);
            gb.lower.resize(in.net.output_dim());
            gb.upper.resize(in.net.output_dim());
            for (Eigen::Index j = 0; j < in.net.output_dim(); ++j) {
                gb.lower(j) = pgd_optimize(build_quadratic(in.net, j, sweep.bounds, ball, Sense::Minimize)).value;
                gb.upper(j) = pgd_optimize(build_quadratic(in.net, j, sweep.bounds, ball, Sense::Maximize)).value;
            }
        } else {
            const auto strategy = method == Method::FastLin ? ReluLowerStrategy::FastLin : ReluLowerStrategy::Adaptive;
            gb = output_bounds(in.net, ball, strategy);
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const VectorXd logits = forward(in.net, pt.x);
        records[i] = {{"id", pt.id},
                      {"label", pt.label ? json(*pt.label) : json(nullptr)},
                      {"predicted", argmax(logits)},
                      {"logits", vector_json(logits)},
                      {"lower", vector_json(gb.lower)},
                      {"upper", vector_json(gb.upper)},
                      {"time_ms", ms}};
    });

    json report = report_header("bounds", f);
    report["methods"] = json::array({to_string(method)});
    report["eps"] = bf.eps;
    report["records"] = records;
    double total_ms = 0.0;
    for (const json& r : records) total_ms += r["time_ms"].get<double>();
    report["aggregate"] = {{"points", records.size()},
                           {"mean_time_ms", records.empty() ? 0.0 : total_ms / static_cast<double>(records.size())}};

    if (!f.output.empty()) write_atomic(f.output, report.dump(2));
    else out << report.dump(2) << '\n';
    std::ostream& summary = f.output.empty() ? err : out;
    summary << "bounds: " << records.size() << " points, eps " << bf.eps << ", norm " << f.norm << ", method "
            << bf.method << '\n';
    return kOk;
}

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--network", f.network, "crown-net-v1 weight file")->required();
    sub->add_option("--inputs", f.inputs, "points file")->required();
    sub->add_option("--norm", f.norm, "perturbation norm: 1, 2 or inf")
        ->check(CLI::IsMember({"1", "2", "inf"}))
        ->capture_default_str();
    sub->add_option("--output", f.output, "report path (stdout when omitted)");
    sub->add_option("--jobs", f.jobs, "points certified in parallel")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Certified lower bounds on adversarial distortion for feed-forward networks", "crown"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    CommonFlags common;
    CertifyFlags cf;
    BoundsFlags bf;
    const std::vector<std::string> method_names{"fastlin", "crown-ada", "crown-general", "crown-quad"};

    auto* certify = app.add_subcommand("certify", "binary-search the certified radius per point");
    add_common(certify, common);
    certify->add_option("--method", cf.method)->check(CLI::IsMember(method_names))->capture_default_str();
    certify->add_option("--target", cf.target, "runner-up, random, least, all or a class index")
        ->capture_default_str();
    certify->add_option("--tol", cf.tol, "relative tolerance of the radius search")->capture_default_str();
    certify->add_option("--eps-init", cf.eps_init, "first probe radius")->capture_default_str();
    certify->add_option("--seed", cf.seed, "seed for --target random")->capture_default_str();

    auto* bounds = app.add_subcommand("bounds", "output bounds at a fixed radius");
    add_common(bounds, common);
    bounds->add_option("--eps", bf.eps, "ball radius")->required();
    bounds->add_option("--method", bf.method)->check(CLI::IsMember(method_names))->capture_default_str();

    auto* compare = app.add_subcommand("compare", "certify with several methods side by side");
    add_common(compare, common);
    compare->add_option("--methods", cf.methods, "comma-separated method list")->required();
    compare->add_option("--target", cf.target)->capture_default_str();
    compare->add_option("--tol", cf.tol)->capture_default_str();
    compare->add_option("--eps-init", cf.eps_init)->capture_default_str();
    compare->add_option("--seed", cf.seed)->capture_default_str();

    std::vector<std::string> argv_store{"crown"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kBadFlags;
    }

    try {
        if (certify->parsed()) return run_certify("certify", common, cf, {parse_method(cf.method)}, out, err);
        if (compare->parsed()) return run_certify("compare", common, cf, parse_method_list(cf.methods), out, err);
        if (bounds->parsed()) return run_bounds(common, bf, out, err);
    } catch (const Failure& f) {
        err << "error: " << f.message << '\n';
        return f.code;
    } catch (const UnsupportedError& e) {
        err << "error: " << e.what() << '\n';
        return kIncompatible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFileError;
    }
    return kBadFlags;
}

}  // namespace crown::cli
