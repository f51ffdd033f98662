#include "biaslogit/bias.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace biaslogit {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kBoundSlack = 1e-12;

double sample_point(int i) { return static_cast<double>(i) / kAssumptionSamples; }
double interior_point(int i) { return (static_cast<double>(i) + 0.5) / kAssumptionSamples; }

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be finite");
}

bool parse_row(const std::string& line, double& x, double& y) {
    std::string cleaned = line;
    std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
    std::replace(cleaned.begin(), cleaned.end(), ';', ' ');
    std::istringstream in(cleaned);
    std::string rest;
    if (!(in >> x >> y)) return false;
    return !(in >> rest);
}

}  // namespace

BiasCurve::BiasCurve(Definition definition) : definition_(std::move(definition)) {
    std::visit(overloaded{
                   [](const AffineCurve& c) {
                       require_finite(c.intercept, "affine intercept");
                       require_finite(c.slope, "affine slope");
                       if (!(c.slope > 0.0)) {
                           throw std::invalid_argument("affine bias curve needs a positive slope");
                       }
                   },
                   [](const SmoothstepCurve& c) {
                       require_finite(c.intercept, "smoothstep intercept");
                       require_finite(c.linear_slope, "smoothstep linear slope");
                       require_finite(c.amplitude, "smoothstep amplitude");
                       if (!(c.linear_slope > 0.0) || c.amplitude < 0.0) {
                           throw std::invalid_argument(
                               "smoothstep bias curve needs linear_slope > 0 and amplitude >= 0");
                       }
                   },
                   [this](const TabulatedCurve& c) {
                       if (c.x.size() < 2 || c.x.size() != c.y.size()) {
                           throw std::invalid_argument(
                               "tabulated bias curve needs >= 2 points with matching columns");
                       }
                       for (std::size_t i = 0; i < c.x.size(); ++i) {
                           require_finite(c.x[i], "tabulated x");
                           require_finite(c.y[i], "tabulated value");
                           if (i > 0 && !(c.x[i] > c.x[i - 1])) {
                               throw std::invalid_argument(
                                   "tabulated bias curve x must be strictly increasing");
                           }
                           if (i > 0 && !(c.y[i] < c.y[i - 1])) {
                               throw std::invalid_argument(
                                   "tabulated bias curve values must be strictly decreasing");
                           }
                       }
                       if (c.x.front() > 0.0 || c.x.back() < 1.0) {
                           throw std::invalid_argument("tabulated bias curve must cover [0, 1]");
                       }
                       table_ = CubicHermite::monotone(c.x, c.y);
                   },
               },
               definition_);
    compute_bounds();
    verify_bounds();
}

BiasCurve BiasCurve::affine(double intercept, double slope) {
    return BiasCurve(AffineCurve{intercept, slope});
}

BiasCurve BiasCurve::smoothstep(double intercept, double linear_slope, double amplitude) {
    return BiasCurve(SmoothstepCurve{intercept, linear_slope, amplitude});
}

BiasCurve BiasCurve::tabulated(Vector x, Vector y) {
    return BiasCurve(TabulatedCurve{std::move(x), std::move(y), {}});
}

BiasCurve BiasCurve::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open bias table " + path.string());
    Vector xs, ys;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        double x = 0.0, y = 0.0;
        if (!parse_row(line, x, y)) {
            if (xs.empty() && line_no == 1) continue;  // header
            std::ostringstream msg;
            msg << path.string() << ":" << line_no << ": expected two numeric columns";
            throw std::invalid_argument(msg.str());
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    return BiasCurve(TabulatedCurve{std::move(xs), std::move(ys), path.string()});
}

double BiasCurve::value(double x) const {
    return std::visit(overloaded{
                          [x](const AffineCurve& c) { return c.intercept - c.slope * x; },
                          [x](const SmoothstepCurve& c) {
                              return c.intercept - c.linear_slope * x -
                                     c.amplitude * x * x * (3.0 - 2.0 * x);
                          },
                          [this, x](const TabulatedCurve&) { return table_.value(x); },
                      },
                      definition_);
}

double BiasCurve::derivative(double x) const {
    return std::visit(overloaded{
                          [](const AffineCurve& c) { return -c.slope; },
                          [x](const SmoothstepCurve& c) {
                              return -c.linear_slope - 6.0 * c.amplitude * x * (1.0 - x);
                          },
                          [this, x](const TabulatedCurve&) { return table_.derivative(x); },
                      },
                      definition_);
}

void BiasCurve::compute_bounds() {
    std::visit(overloaded{
                   [this](const AffineCurve& c) {
                       max_value_ = c.intercept;
                       min_value_ = c.intercept - c.slope;
                       min_slope_ = max_slope_ = c.slope;
                   },
                   [this](const SmoothstepCurve& c) {
                       max_value_ = c.intercept;
                       min_value_ = c.intercept - c.linear_slope - c.amplitude;
                       min_slope_ = c.linear_slope;
                       max_slope_ = c.linear_slope + 1.5 * c.amplitude;
                   },
                   [this](const TabulatedCurve&) {
                       min_value_ = std::numeric_limits<double>::infinity();
                       max_value_ = -min_value_;
                       min_slope_ = std::numeric_limits<double>::infinity();
                       max_slope_ = 0.0;
                       for (int i = 0; i <= kAssumptionSamples; ++i) {
                           const double v = table_.value(sample_point(i));
                           min_value_ = std::min(min_value_, v);
                           max_value_ = std::max(max_value_, v);
                       }
                       for (int i = 0; i < kAssumptionSamples; ++i) {
                           const double slope = -table_.derivative(interior_point(i));
                           min_slope_ = std::min(min_slope_, slope);
                           max_slope_ = std::max(max_slope_, slope);
                       }
                   },
               },
               definition_);
}

void BiasCurve::verify_bounds() const {
    if (!(min_slope_ > 0.0)) {
        throw std::invalid_argument("bias curve is not strictly decreasing on (0, 1)");
    }
    for (int i = 0; i <= kAssumptionSamples; ++i) {
        const double v = value(sample_point(i));
        if (v < min_value_ - kBoundSlack || v > max_value_ + kBoundSlack) {
            throw std::invalid_argument("bias curve leaves its declared value bounds");
        }
    }
    for (int i = 0; i < kAssumptionSamples; ++i) {
        const double slope = -derivative(interior_point(i));
        if (slope < min_slope_ - kBoundSlack || slope > max_slope_ + kBoundSlack) {
            throw std::invalid_argument("bias curve derivative leaves its declared bounds");
        }
    }
}

namespace {

struct CurveBounds {
    double value_low, value_high, slope_low, slope_high;
};

CurveBounds aggregate(const std::vector<BiasCurve>& curves) {
    if (curves.size() < 2) throw std::invalid_argument("bias model needs at least two curves");
    CurveBounds b{curves[0].min_value(), curves[0].max_value(), curves[0].min_slope(),
                  curves[0].max_slope()};
    for (const auto& c : curves) {
        b.value_low = std::min(b.value_low, c.min_value());
        b.value_high = std::max(b.value_high, c.max_value());
        b.slope_low = std::min(b.slope_low, c.min_slope());
        b.slope_high = std::max(b.slope_high, c.max_slope());
    }
    return b;
}

void require_size(std::size_t expected, std::size_t actual, const char* what) {
    if (expected != actual) {
        std::ostringstream msg;
        msg << what << " has " << actual << " entries, bias model has " << expected;
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

AdditiveBias::AdditiveBias(std::vector<BiasCurve> curves) : curves_(std::move(curves)) {
    const auto b = aggregate(curves_);
    b_low_ = b.value_low;
    b_high_ = b.value_high;
    c_low_ = b.slope_low;
    c_high_ = b.slope_high;
}

AdditiveBias AdditiveBias::uniform(std::size_t n, const BiasCurve& curve) {
    return AdditiveBias(std::vector<BiasCurve>(n, curve));
}

MultiplicativeBias::MultiplicativeBias(std::vector<BiasCurve> curves) : curves_(std::move(curves)) {
    const auto b = aggregate(curves_);
    w_low_ = b.value_low;
    w_high_ = b.value_high;
    v_low_ = b.slope_low;
    v_high_ = b.slope_high;
    if (!(w_low_ > 0.0)) {
        throw std::invalid_argument("multiplicative bias weights must stay positive on [0, 1]");
    }
}

MultiplicativeBias MultiplicativeBias::uniform(std::size_t n, const BiasCurve& curve) {
    return MultiplicativeBias(std::vector<BiasCurve>(n, curve));
}

CostVector bias_additive(const AdditiveBias& bias, const PopulationState& pi) {
    require_size(bias.size(), pi.size(), "population state");
    Vector out(pi.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = bias.curves()[k].value(pi[k]);
    return CostVector(std::move(out));
}

DiagonalMatrix bias_additive_jacobian(const AdditiveBias& bias, const PopulationState& pi) {
    require_size(bias.size(), pi.size(), "population state");
    DiagonalMatrix out{Vector(pi.size())};
    for (std::size_t k = 0; k < pi.size(); ++k) {
        out.diagonal[k] = bias.curves()[k].derivative(pi[k]);
    }
    return out;
}

CostVector bias_multiplicative(const MultiplicativeBias& bias, const PopulationState& pi,
                               const CostVector& T) {
    require_size(bias.size(), pi.size(), "population state");
    require_size(bias.size(), T.size(), "actual cost");
    Vector out(pi.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = bias.curves()[k].value(pi[k]) * T[k];
    return CostVector(std::move(out));
}

DiagonalMatrix bias_weights(const MultiplicativeBias& bias, const PopulationState& pi) {
    require_size(bias.size(), pi.size(), "population state");
    DiagonalMatrix out{Vector(pi.size())};
    for (std::size_t k = 0; k < pi.size(); ++k) out.diagonal[k] = bias.curves()[k].value(pi[k]);
    return out;
}

DiagonalMatrix bias_multiplicative_jacobian(const MultiplicativeBias& bias,
                                            const PopulationState& pi) {
    require_size(bias.size(), pi.size(), "population state");
    DiagonalMatrix out{Vector(pi.size())};
    for (std::size_t k = 0; k < pi.size(); ++k) {
        out.diagonal[k] = bias.curves()[k].derivative(pi[k]);
    }
    return out;
}

DiagonalMatrix phi_matrix(const MultiplicativeBias& bias, const PopulationState& pi,
                          const CostVector& T) {
    require_size(bias.size(), T.size(), "actual cost");
    auto out = bias_multiplicative_jacobian(bias, pi);
    for (std::size_t k = 0; k < out.size(); ++k) out.diagonal[k] = -out.diagonal[k] * T[k];
    return out;
}

double shortage_coefficient_model1(const AdditiveBias& bias) { return bias.c_high(); }

double shortage_coefficient_model2(const MultiplicativeBias& bias, double t_max) {
    if (!(t_max > 0.0) || !std::isfinite(t_max)) {
        throw std::invalid_argument("cost upper bound t_max must be positive");
    }
    return bias.v_high() * t_max / (bias.w_low() * bias.w_low());
}

}  // namespace biaslogit
