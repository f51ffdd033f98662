#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "biaslogit/certificates.hpp"
#include "biaslogit/commands.hpp"
#include "biaslogit/config.hpp"
#include "biaslogit/dynamics.hpp"
#include "biaslogit/output.hpp"

namespace py = pybind11;
using namespace biaslogit;

namespace {

LogitParams logit_params(double eta, double beta, std::size_t n) {
    LogitParams p{eta, beta, n};
    p.validate();
    return p;
}

// Runs a configuration in memory and returns trajectory columns plus reports as JSON text.
std::string simulate_json(const std::string& config_text, bool with_certificates) {
    const auto cfg = parse_config(config_text);
    const auto traj = run(build_scenario(cfg));
    nlohmann::json doc;
    nlohmann::json cols = nlohmann::json::object();
    const auto& samples = traj.samples;
    auto column = [&](auto get) {
        nlohmann::json c = nlohmann::json::array();
        for (const auto& s : samples) c.push_back(get(s));
        return c;
    };
    cols["t"] = column([](const TrajectorySample& s) { return s.t; });
    cols["pi"] = column([](const TrajectorySample& s) { return s.pi; });
    cols["tau"] = column([](const TrajectorySample& s) { return s.tau; });
    cols["T"] = column([](const TrajectorySample& s) { return s.T; });
    cols["mu"] = column([](const TrajectorySample& s) { return s.mu; });
    cols["S"] = column([](const TrajectorySample& s) { return s.S; });
    cols["H_or_U"] = column([](const TrajectorySample& s) { return s.aux; });
    cols["V"] = column([](const TrajectorySample& s) { return s.V; });
    cols["event_flags"] = column([](const TrajectorySample& s) { return s.events; });
    doc["trajectory"] = std::move(cols);
    if (with_certificates) {
        std::vector<CertificateReport> reports;
        for (auto id : cfg.certificates.empty() ? applicable_certificates(traj.scenario)
                                                : cfg.certificates) {
            reports.push_back(certify(traj, id, cfg.certificate_options));
        }
        doc["certificates"] = certificates_document(reports);
    }
    const auto conv = detect_convergence(traj, cfg.convergence.epsilon, cfg.convergence.window);
    doc["converged"] = conv.converged;
    doc["final_error"] = conv.final_error;
    return doc.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Logit dynamics with biased cost perception and correcting mechanisms";

    py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<RunAborted>(m, "RunAborted", PyExc_RuntimeError);

    m.def("softmax_q",
          [](const Vector& tau, double eta, double beta) {
              return softmax_q(CostVector{tau}, logit_params(eta, beta, tau.size())).vector();
          },
          py::arg("tau"), py::arg("eta") = 1.0, py::arg("beta") = 1.0);
    m.def("logit_vector_field",
          [](const Vector& pi, const Vector& tau, double eta, double beta) {
              return logit_vector_field(PopulationState{pi}, CostVector{tau},
                                        logit_params(eta, beta, pi.size()));
          },
          py::arg("pi"), py::arg("tau"), py::arg("eta") = 1.0, py::arg("beta") = 1.0);
    m.def("storage_closed_form",
          [](const Vector& tau, const Vector& pi, double eta, double beta) {
              return storage_closed_form(CostVector{tau}, PopulationState{pi},
                                         logit_params(eta, beta, pi.size()))
                  .value;
          },
          py::arg("tau"), py::arg("pi"), py::arg("eta") = 1.0, py::arg("beta") = 1.0);
    m.def("storage_brute_force",
          [](const Vector& tau, const Vector& pi, double eta, double beta, int grid) {
              return storage_brute_force(CostVector{tau}, PopulationState{pi},
                                         logit_params(eta, beta, pi.size()), grid)
                  .value;
          },
          py::arg("tau"), py::arg("pi"), py::arg("eta") = 1.0, py::arg("beta") = 1.0,
          py::arg("grid_resolution") = 50);

    py::class_<BiasCurve>(m, "BiasCurve")
        .def_static("affine", &BiasCurve::affine, py::arg("intercept"), py::arg("slope"))
        .def_static("smoothstep", &BiasCurve::smoothstep, py::arg("intercept"),
                    py::arg("linear_slope"), py::arg("amplitude"))
        .def_static("tabulated", &BiasCurve::tabulated, py::arg("x"), py::arg("y"))
        .def_static("from_csv", &BiasCurve::from_csv, py::arg("path"))
        .def("value", &BiasCurve::value)
        .def("derivative", &BiasCurve::derivative)
        .def_property_readonly("min_value", &BiasCurve::min_value)
        .def_property_readonly("max_value", &BiasCurve::max_value)
        .def_property_readonly("min_slope", &BiasCurve::min_slope)
        .def_property_readonly("max_slope", &BiasCurve::max_slope);

    py::class_<AdditiveBias>(m, "AdditiveBias")
        .def(py::init<std::vector<BiasCurve>>(), py::arg("curves"))
        .def("perceived",
             [](const AdditiveBias& b, const Vector& pi, const Vector& T) {
                 const auto bias = bias_additive(b, PopulationState{pi});
                 Vector tau(T.size());
                 for (std::size_t k = 0; k < T.size(); ++k) tau[k] = T[k] + bias[k];
                 return tau;
             },
             py::arg("pi"), py::arg("T"))
        .def_property_readonly("c_high", &AdditiveBias::c_high)
        .def_property_readonly("shortage_coefficient", &shortage_coefficient_model1);

    py::class_<MultiplicativeBias>(m, "MultiplicativeBias")
        .def(py::init<std::vector<BiasCurve>>(), py::arg("curves"))
        .def("perceived",
             [](const MultiplicativeBias& b, const Vector& pi, const Vector& T) {
                 return bias_multiplicative(b, PopulationState{pi}, CostVector{T}).vector();
             },
             py::arg("pi"), py::arg("T"))
        .def_property_readonly("w_low", &MultiplicativeBias::w_low)
        .def_property_readonly("w_high", &MultiplicativeBias::w_high)
        .def_property_readonly("v_high", &MultiplicativeBias::v_high)
        .def("shortage_coefficient", &shortage_coefficient_model2, py::arg("t_max"));

    py::class_<ConjugatePair>(m, "ConjugatePair")
        .def(py::init<BiasCurve>(), py::arg("weight"))
        .def("primitive", &ConjugatePair::primitive)
        .def("primitive_grad", &ConjugatePair::primitive_grad)
        .def("conjugate_grad", &ConjugatePair::conjugate_grad)
        .def("conjugate_value", &ConjugatePair::conjugate_value);

    m.def("check_gains",
          [](const std::string& config_text) {
              const auto cfg = parse_config(config_text);
              const auto s = build_scenario(cfg);
              GainTheorem theorem;
              if (cfg.mechanism == MechanismKind::pi && cfg.bias == BiasKind::additive) {
                  theorem = GainTheorem::pi_additive;
              } else if (cfg.mechanism == MechanismKind::saturated &&
                         cfg.bias == BiasKind::multiplicative) {
                  theorem = GainTheorem::saturated_multiplicative;
              } else {
                  throw ConfigError("no gain condition for this model and mechanism", "/mechanism", 0);
              }
              const auto v = check_gain_condition(theorem, s.bias, s.gains);
              py::dict d;
              d["satisfied"] = v.satisfied;
              d["feasible"] = v.feasible;
              d["alpha_ok"] = v.alpha_ok;
              d["threshold"] = v.threshold;
              d["margin"] = v.margin;
              d["min_kappa"] = v.min_kappa;
              return d;
          },
          py::arg("config_text"));

    m.def("simulate_json", &simulate_json, py::arg("config_text"),
          py::arg("certificates") = true, py::call_guard<py::gil_scoped_release>());
    m.def("normalize_config",
          [](const std::string& text) { return to_json(parse_config(text)).dump(); },
          py::arg("config_text"));

    auto command = [](auto fn) {
        return [fn](const std::string& config, std::optional<std::string> out, bool strict,
                    bool resume, unsigned threads) {
            CommandOptions o;
            o.config = config;
            if (out) o.out = *out;
            o.strict = strict;
            o.resume = resume;
            o.threads = threads;
            std::ostringstream sout, serr;
            int code;
            {
                py::gil_scoped_release release;
                code = fn(o, sout, serr);
            }
            return py::make_tuple(code, sout.str(), serr.str());
        };
    };
    m.def("cmd_run", command(&cmd_run), py::arg("config"), py::arg("out") = py::none(),
          py::arg("strict") = false, py::arg("resume") = false, py::arg("threads") = 1);
    m.def("cmd_check_gains", command(&cmd_check_gains), py::arg("config"),
          py::arg("out") = py::none(), py::arg("strict") = false, py::arg("resume") = false,
          py::arg("threads") = 1);
    m.def("cmd_sweep", command(&cmd_sweep), py::arg("config"), py::arg("out") = py::none(),
          py::arg("strict") = false, py::arg("resume") = false, py::arg("threads") = 1);
}
