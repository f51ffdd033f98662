#include "biaslogit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace biaslogit {

using nlohmann::json;

ConfigError::ConfigError(std::string message, std::string path, int line)
    : std::runtime_error(std::move(message)), path_(std::move(path)), line_(line) {}

std::string_view to_string(BiasKind kind) {
    switch (kind) {
        case BiasKind::none:
            return "none";
        case BiasKind::additive:
            return "additive";
        case BiasKind::multiplicative:
            return "multiplicative";
    }
    return "none";
}

std::string_view to_string(MechanismKind kind) {
    switch (kind) {
        case MechanismKind::none:
            return "none";
        case MechanismKind::pi:
            return "pi";
        case MechanismKind::saturated:
            return "saturated";
    }
    return "none";
}

namespace {

// Line of the first occurrence of the innermost object key in `path`.
int locate(const std::string& text, const std::string& path) {
    std::string key;
    std::istringstream segments(path);
    std::string segment;
    while (std::getline(segments, segment, '/')) {
        if (!segment.empty() && !std::all_of(segment.begin(), segment.end(), ::isdigit)) {
            key = segment;
        }
    }
    if (key.empty()) return 0;
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

class Context {
public:
    explicit Context(const std::string& text) : text_(text) {}

    [[noreturn]] void fail(const std::string& path, const std::string& message) const {
        const int line = locate(text_, path);
        std::ostringstream msg;
        if (line > 0) msg << "line " << line << ": ";
        msg << (path.empty() ? "/" : path) << ": " << message;
        throw ConfigError(msg.str(), path, line);
    }

private:
    const std::string& text_;
};

class ObjectReader {
public:
    ObjectReader(const Context& ctx, const json& value, std::string path)
        : ctx_(ctx), value_(value), path_(std::move(path)) {
        if (!value_.is_object()) ctx_.fail(path_, "expected an object");
    }

    bool has(const std::string& key) {
        known_.insert(key);
        return value_.contains(key);
    }

    std::string child(const std::string& key) const { return path_ + "/" + key; }

    const json& get(const std::string& key) {
        known_.insert(key);
        if (!value_.contains(key)) ctx_.fail(child(key), "required key is missing");
        return value_.at(key);
    }

    double number(const std::string& key, double fallback) {
        if (!has(key)) return fallback;
        return as_number(value_.at(key), child(key));
    }

    double number(const std::string& key) { return as_number(get(key), child(key)); }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) return fallback;
        const auto& v = value_.at(key);
        if (!v.is_string()) ctx_.fail(child(key), "expected a string");
        return v.get<std::string>();
    }

    Vector vector(const std::string& key) {
        if (!has(key)) return {};
        return as_vector(value_.at(key), child(key));
    }

    double as_number(const json& v, const std::string& path) const {
        if (!v.is_number()) ctx_.fail(path, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) ctx_.fail(path, "expected a finite number");
        return d;
    }

    Vector as_vector(const json& v, const std::string& path) const {
        if (!v.is_array()) ctx_.fail(path, "expected an array of numbers");
        Vector out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            out.push_back(as_number(v[i], path + "/" + std::to_string(i)));
        }
        return out;
    }

    // Rejects keys that were never asked for.
    void finish() const {
        for (auto it = value_.begin(); it != value_.end(); ++it) {
            if (!known_.count(it.key())) ctx_.fail(child(it.key()), "unknown key");
        }
    }

private:
    const Context& ctx_;
    const json& value_;
    std::string path_;
    std::set<std::string> known_;
};

BiasCurve::Definition parse_curve(const Context& ctx, const json& value, const std::string& path,
                                  const std::filesystem::path& base_dir) {
    ObjectReader r(ctx, value, path);
    const std::string family = r.string("family", "");
    BiasCurve::Definition def;
    if (family == "affine") {
        def = AffineCurve{r.number("intercept"), r.number("slope")};
    } else if (family == "smoothstep") {
        def = SmoothstepCurve{r.number("intercept"), r.number("linear_slope"), r.number("amplitude")};
    } else if (family == "tabulated") {
        if (r.has("csv")) {
            const std::string source = r.string("csv", "");
            std::filesystem::path file = source;
            if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
            try {
                const auto loaded = BiasCurve::from_csv(file);
                auto table = std::get<TabulatedCurve>(loaded.definition());
                table.source = source;
                def = std::move(table);
            } catch (const std::invalid_argument& e) {
                ctx.fail(r.child("csv"), e.what());
            }
        } else {
            def = TabulatedCurve{r.as_vector(r.get("x"), r.child("x")),
                                 r.as_vector(r.get("y"), r.child("y")), {}};
        }
    } else {
        ctx.fail(r.child("family"), "family must be affine, smoothstep or tabulated");
    }
    r.finish();
    try {
        BiasCurve check(def);
    } catch (const std::invalid_argument& e) {
        ctx.fail(path, e.what());
    }
    return def;
}

json curve_to_json(const BiasCurve::Definition& def) {
    if (const auto* a = std::get_if<AffineCurve>(&def)) {
        return {{"family", "affine"}, {"intercept", a->intercept}, {"slope", a->slope}};
    }
    if (const auto* s = std::get_if<SmoothstepCurve>(&def)) {
        return {{"family", "smoothstep"},
                {"intercept", s->intercept},
                {"linear_slope", s->linear_slope},
                {"amplitude", s->amplitude}};
    }
    const auto& t = std::get<TabulatedCurve>(def);
    if (!t.source.empty()) return {{"family", "tabulated"}, {"csv", t.source}};
    return {{"family", "tabulated"}, {"x", t.x}, {"y", t.y}};
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto offset = std::min<std::size_t>(e.byte, text.size());
        const int line =
            1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
        std::ostringstream msg;
        msg << "line " << line << ": invalid JSON: " << e.what();
        throw ConfigError(msg.str(), "", line);
    }

    const Context ctx(text);
    ExperimentConfig cfg;
    ObjectReader root(ctx, doc, "");

    const double strategies = root.number("strategies");
    if (strategies < 2 || std::floor(strategies) != strategies) {
        ctx.fail("/strategies", "strategies must be an integer >= 2");
    }
    cfg.strategies = static_cast<std::size_t>(strategies);
    const std::size_t n = cfg.strategies;

    auto require_length = [&](const Vector& v, const std::string& path) {
        if (!v.empty() && v.size() != n) {
            ctx.fail(path, "expected " + std::to_string(n) + " entries");
        }
    };

    cfg.logit.n = n;
    if (root.has("logit")) {
        ObjectReader r(ctx, doc.at("logit"), "/logit");
        cfg.logit.eta = r.number("eta", 1.0);
        cfg.logit.beta = r.number("beta", 1.0);
        r.finish();
    }
    if (!(cfg.logit.eta > 0.0)) ctx.fail("/logit/eta", "eta must be positive");
    if (!(cfg.logit.beta > 0.0)) ctx.fail("/logit/beta", "beta must be positive");

    if (root.has("bias")) {
        ObjectReader r(ctx, doc.at("bias"), "/bias");
        const std::string model = r.string("model", "none");
        if (model == "none") {
            cfg.bias = BiasKind::none;
        } else if (model == "additive") {
            cfg.bias = BiasKind::additive;
        } else if (model == "multiplicative") {
            cfg.bias = BiasKind::multiplicative;
        } else {
            ctx.fail("/bias/model", "model must be none, additive or multiplicative");
        }
        const bool one = r.has("curve"), many = r.has("curves");
        if (one && many) ctx.fail("/bias", "give either curve or curves, not both");
        if (one) {
            const auto def = parse_curve(ctx, doc.at("bias").at("curve"), "/bias/curve", base_dir);
            cfg.curves.assign(n, def);
        } else if (many) {
            const auto& list = doc.at("bias").at("curves");
            if (!list.is_array() || list.size() != n) {
                ctx.fail("/bias/curves", "expected one curve per strategy");
            }
            for (std::size_t k = 0; k < n; ++k) {
                cfg.curves.push_back(
                    parse_curve(ctx, list[k], "/bias/curves/" + std::to_string(k), base_dir));
            }
        }
        r.finish();
        if (cfg.bias != BiasKind::none && cfg.curves.empty()) {
            ctx.fail("/bias", "a biased model needs curve or curves");
        }
        if (cfg.bias == BiasKind::none && !cfg.curves.empty()) {
            ctx.fail("/bias", "curves given for an unbiased model");
        }
    }

    if (root.has("mechanism")) {
        ObjectReader r(ctx, doc.at("mechanism"), "/mechanism");
        const std::string kind = r.string("kind", "none");
        if (kind == "none") {
            cfg.mechanism = MechanismKind::none;
        } else if (kind == "pi") {
            cfg.mechanism = MechanismKind::pi;
        } else if (kind == "saturated") {
            cfg.mechanism = MechanismKind::saturated;
        } else {
            ctx.fail("/mechanism/kind", "kind must be none, pi or saturated");
        }
        cfg.gains.rho = r.number("rho", 1.0);
        cfg.gains.kappa = r.number("kappa", 1.0);
        cfg.gains.alpha = r.number("alpha", 1.0);
        cfg.gains.t_bar = r.number("t_bar", 1.0);
        cfg.mu0 = r.vector("mu0");
        require_length(cfg.mu0, "/mechanism/mu0");
        r.finish();
    }
    if (cfg.mu0.empty()) cfg.mu0.assign(n, 0.0);

    if (root.has("actual_cost")) {
        ObjectReader r(ctx, doc.at("actual_cost"), "/actual_cost");
        cfg.actual_cost.offset = r.vector("offset");
        require_length(cfg.actual_cost.offset, "/actual_cost/offset");
        if (r.has("waves")) {
            const auto& waves = doc.at("actual_cost").at("waves");
            if (!waves.is_array() || waves.size() != n) {
                ctx.fail("/actual_cost/waves", "expected one list of waves per strategy");
            }
            for (std::size_t k = 0; k < n; ++k) {
                const std::string kpath = "/actual_cost/waves/" + std::to_string(k);
                if (!waves[k].is_array()) ctx.fail(kpath, "expected an array of waves");
                std::vector<Sinusoid> list;
                for (std::size_t j = 0; j < waves[k].size(); ++j) {
                    ObjectReader w(ctx, waves[k][j], kpath + "/" + std::to_string(j));
                    list.push_back({w.number("amplitude"), w.number("frequency", 1.0),
                                    w.number("phase", 0.0)});
                    w.finish();
                }
                cfg.actual_cost.waves.push_back(std::move(list));
            }
        }
        r.finish();
    }
    if (cfg.actual_cost.offset.empty()) cfg.actual_cost.offset.assign(n, 0.0);

    cfg.initial_state = root.vector("initial_state");
    require_length(cfg.initial_state, "/initial_state");
    if (cfg.initial_state.empty()) cfg.initial_state.assign(n, 1.0 / static_cast<double>(n));
    cfg.target = root.vector("target");
    require_length(cfg.target, "/target");
    if (cfg.target.empty()) cfg.target.assign(n, 1.0 / static_cast<double>(n));

    cfg.step = 1e-3 / cfg.logit.eta;
    if (root.has("integration")) {
        ObjectReader r(ctx, doc.at("integration"), "/integration");
        cfg.horizon = r.number("horizon", cfg.horizon);
        cfg.step = r.number("step", cfg.step);
        cfg.record_interval = r.number("record_interval", cfg.record_interval);
        r.finish();
    }

    if (root.has("convergence")) {
        ObjectReader r(ctx, doc.at("convergence"), "/convergence");
        cfg.convergence.epsilon = r.number("epsilon", cfg.convergence.epsilon);
        cfg.convergence.window = r.number("window", cfg.convergence.window);
        r.finish();
    }

    if (root.has("certificates")) {
        const auto& list = doc.at("certificates");
        if (!list.is_array()) ctx.fail("/certificates", "expected an array of certificate names");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string path = "/certificates/" + std::to_string(i);
            if (!list[i].is_string()) ctx.fail(path, "expected a certificate name");
            const auto name = list[i].get<std::string>();
            if (name == "all") {
                cfg.certificates.clear();
                break;
            }
            const auto id = certificate_from_string(name);
            if (!id) ctx.fail(path, "unknown certificate '" + name + "'");
            cfg.certificates.push_back(*id);
        }
    }

    if (root.has("certificate_options")) {
        ObjectReader r(ctx, doc.at("certificate_options"), "/certificate_options");
        auto& o = cfg.certificate_options;
        o.relative_tolerance = r.number("relative_tolerance", o.relative_tolerance);
        o.v1_tolerance = r.number("v1_tolerance", o.v1_tolerance);
        o.v2_tolerance = r.number("v2_tolerance", o.v2_tolerance);
        r.finish();
    }

    if (root.has("sweep")) {
        ObjectReader r(ctx, doc.at("sweep"), "/sweep");
        SweepSpec sweep;
        sweep.parameter = r.string("parameter", "kappa");
        static const std::set<std::string> allowed{"kappa", "rho", "alpha", "t_bar",
                                                   "eta",   "beta", "step"};
        if (!allowed.count(sweep.parameter)) {
            ctx.fail("/sweep/parameter", "parameter must be one of kappa, rho, alpha, t_bar, eta, beta, step");
        }
        sweep.values = r.as_vector(r.get("values"), "/sweep/values");
        r.finish();
        cfg.sweep = std::move(sweep);
    }

    cfg.output_dir = root.string("output_dir", cfg.output_dir);
    root.finish();

    auto require_interior = [&](const Vector& v, const std::string& path) {
        try {
            PopulationState checked{v};
        } catch (const std::invalid_argument& e) {
            ctx.fail(path, e.what());
        }
        for (double p : v) {
            if (p < kInteriorMargin) ctx.fail(path, "state lies on the boundary of the simplex");
        }
    };
    require_interior(cfg.initial_state, "/initial_state");
    require_interior(cfg.target, "/target");

    try {
        build_scenario(cfg).validate();
    } catch (const std::invalid_argument& e) {
        const std::string message = e.what();
        std::string path;
        if (message.find("mu(0)") != std::string::npos) {
            path = "/mechanism/mu0";
        } else if (message.find("alpha") != std::string::npos ||
                   message.find("kappa") != std::string::npos ||
                   message.find("rho") != std::string::npos ||
                   message.find("t_bar") != std::string::npos) {
            path = "/mechanism";
        } else if (message.find("interval") != std::string::npos ||
                   message.find("horizon") != std::string::npos) {
            path = "/integration";
        }
        ctx.fail(path, message);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string(), "", 0);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["strategies"] = cfg.strategies;
    doc["logit"] = {{"eta", cfg.logit.eta}, {"beta", cfg.logit.beta}};
    json bias = {{"model", std::string(to_string(cfg.bias))}};
    if (!cfg.curves.empty()) {
        json curves = json::array();
        for (const auto& c : cfg.curves) curves.push_back(curve_to_json(c));
        bias["curves"] = std::move(curves);
    }
    doc["bias"] = std::move(bias);
    doc["mechanism"] = {{"kind", std::string(to_string(cfg.mechanism))},
                        {"rho", cfg.gains.rho},
                        {"kappa", cfg.gains.kappa},
                        {"alpha", cfg.gains.alpha},
                        {"t_bar", cfg.gains.t_bar},
                        {"mu0", cfg.mu0}};
    json cost = {{"offset", cfg.actual_cost.offset}};
    if (!cfg.actual_cost.waves.empty()) {
        json waves = json::array();
        for (const auto& list : cfg.actual_cost.waves) {
            json entries = json::array();
            for (const auto& w : list) {
                entries.push_back(
                    {{"amplitude", w.amplitude}, {"frequency", w.frequency}, {"phase", w.phase}});
            }
            waves.push_back(std::move(entries));
        }
        cost["waves"] = std::move(waves);
    }
    doc["actual_cost"] = std::move(cost);
    doc["initial_state"] = cfg.initial_state;
    doc["target"] = cfg.target;
    doc["integration"] = {
        {"horizon", cfg.horizon}, {"step", cfg.step}, {"record_interval", cfg.record_interval}};
    doc["convergence"] = {{"epsilon", cfg.convergence.epsilon}, {"window", cfg.convergence.window}};
    json certs = json::array();
    if (cfg.certificates.empty()) {
        certs.push_back("all");
    } else {
        for (auto id : cfg.certificates) certs.push_back(std::string(to_string(id)));
    }
    doc["certificates"] = std::move(certs);
    doc["certificate_options"] = {
        {"relative_tolerance", cfg.certificate_options.relative_tolerance},
        {"v1_tolerance", cfg.certificate_options.v1_tolerance},
        {"v2_tolerance", cfg.certificate_options.v2_tolerance}};
    if (cfg.sweep) {
        doc["sweep"] = {{"parameter", cfg.sweep->parameter}, {"values", cfg.sweep->values}};
    }
    doc["output_dir"] = cfg.output_dir;
    return doc;
}

Scenario build_scenario(const ExperimentConfig& cfg) {
    Scenario s;
    s.logit = cfg.logit;
    s.logit.n = cfg.strategies;
    if (cfg.bias != BiasKind::none) {
        std::vector<BiasCurve> curves;
        curves.reserve(cfg.curves.size());
        for (const auto& def : cfg.curves) curves.emplace_back(def);
        if (cfg.bias == BiasKind::additive) {
            s.bias = AdditiveBias(std::move(curves));
        } else {
            s.bias = MultiplicativeBias(std::move(curves));
        }
    }
    s.mechanism = cfg.mechanism;
    s.gains = cfg.gains;
    s.actual_cost = cfg.actual_cost;
    s.pi0 = cfg.initial_state;
    s.mu0 = cfg.mu0;
    s.target = cfg.target;
    s.horizon = cfg.horizon;
    s.step = cfg.step;
    s.record_interval = cfg.record_interval;
    return s;
}

ExperimentConfig with_parameter(const ExperimentConfig& config, const std::string& parameter,
                                double value) {
    ExperimentConfig out = config;
    if (parameter == "kappa") {
        out.gains.kappa = value;
    } else if (parameter == "rho") {
        out.gains.rho = value;
    } else if (parameter == "alpha") {
        out.gains.alpha = value;
    } else if (parameter == "t_bar") {
        out.gains.t_bar = value;
    } else if (parameter == "eta") {
        out.logit.eta = value;
    } else if (parameter == "beta") {
        out.logit.beta = value;
    } else if (parameter == "step") {
        out.step = value;
    } else {
        throw std::invalid_argument("unknown sweep parameter '" + parameter + "'");
    }
    return out;
}

}  // namespace biaslogit
