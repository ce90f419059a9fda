#include "mvsim/presets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvsim/error.hpp"

namespace mvsim {

namespace {

// sin(y) / (1 + y^2), the interaction kernel of the published examples.
double damped_sine(double y) { return std::sin(y) / (1.0 + y * y); }

InitialLaw law_from(const Vec& mean, double var) {
    const auto d = mean.size();
    if (var < 0.0) throw ArgumentError("init_var must be >= 0");
    if (var == 0.0) return InitialLaw::point(mean);
    return InitialLaw::gaussian(mean, var * Mat::Identity(d, d));
}

std::vector<Mat> zero_jacobians(int d, int m) { return std::vector<Mat>(m, Mat::Zero(d, d)); }

struct Entry {
    PresetInfo info;
    std::function<PresetInstance(const ParamMap&)> build;
};

PresetInstance build_bm(const ParamMap& p) {
    const int d = static_cast<int>(p.at("d"));
    if (d != 1 && d != 2) throw ArgumentError("bm: d must be 1 or 2");
    const double sig = p.at("sigma");
    PresetInstance out;
    auto& m = out.model;
    m.name = "bm";
    m.d = d;
    m.m = d;
    m.autonomous = true;
    m.b = [d](double, const Vec&, const Vec&) { return Vec::Zero(d).eval(); };
    m.sigma = [d, sig](double, const Vec&, const Vec&) { return (sig * Mat::Identity(d, d)).eval(); };
    m.db_dx = [d](double, const Vec&, const Vec&) { return Mat::Zero(d, d).eval(); };
    m.dsigma_dx = [d](double, const Vec&, const Vec&) { return zero_jacobians(d, d); };
    out.law = law_from(Vec::Constant(d, p.at("x0")), p.at("init_var"));
    out.fp_grid = {std::vector<double>(d, -10.0), std::vector<double>(d, 10.0),
                   std::vector<int>(d, d == 1 ? 2000 : 200)};
    out.lambda = sig * sig;
    return out;
}

PresetInstance build_ou(const ParamMap& p) {
    const double theta = p.at("theta");
    const double sig = p.at("sigma");
    PresetInstance out;
    auto& m = out.model;
    m.name = "ou";
    m.autonomous = true;
    m.b = [theta](double, const Vec& x, const Vec&) { return (-theta * x).eval(); };
    m.sigma = [sig](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, sig); };
    m.db_dx = [theta](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, -theta); };
    m.dsigma_dx = [](double, const Vec&, const Vec&) { return zero_jacobians(1, 1); };
    out.law = law_from(Vec::Constant(1, p.at("x0")), p.at("init_var"));
    out.fp_grid = {{-8.0}, {8.0}, {4000}};
    out.lambda = sig * sig;
    return out;
}

PresetInstance build_gbm(const ParamMap& p) {
    const double mu = p.at("mu");
    const double s = p.at("s");
    PresetInstance out;
    auto& m = out.model;
    m.name = "gbm";
    m.autonomous = true;
    m.b = [mu](double, const Vec& x, const Vec&) { return (mu * x).eval(); };
    m.sigma = [s](double, const Vec& x, const Vec&) { return Mat::Constant(1, 1, s * x(0)); };
    m.db_dx = [mu](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, mu); };
    m.dsigma_dx = [s](double, const Vec&, const Vec&) {
        return std::vector<Mat>{Mat::Constant(1, 1, s)};
    };
    out.law = law_from(Vec::Constant(1, p.at("x0")), p.at("init_var"));
    out.fp_grid = {{-2.0}, {6.0}, {1600}};
    out.lambda = 0.0;
    return out;
}

PresetInstance build_meanfield_ou(const ParamMap& p) {
    const double a = p.at("a");
    const double c = p.at("c");
    const double s = p.at("s");
    PresetInstance out;
    auto& m = out.model;
    m.name = "meanfield-ou";
    m.autonomous = true;
    m.functionals = {{"mean", [](const Vec& y) { return y(0); }, 1}};
    m.b = [a, c](double, const Vec& x, const Vec& st) { return Vec::Constant(1, a * x(0) + c * st(0)); };
    m.sigma = [s](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, s); };
    m.db_dx = [a](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, a); };
    m.dsigma_dx = [](double, const Vec&, const Vec&) { return zero_jacobians(1, 1); };
    out.law = law_from(Vec::Constant(1, p.at("x0")), p.at("init_var"));
    out.fp_grid = {{-3.0}, {4.0}, {1400}};
    out.lambda = s * s;
    return out;
}

CoefficientModel example51_model(double kappa, double diff_scale) {
    CoefficientModel m;
    m.name = "example5-1";
    m.functionals = {{"damped_sine", [](const Vec& y) { return damped_sine(y(0)); }, 1}};
    m.b = [kappa](double t, const Vec& x, const Vec& s) {
        return Vec::Constant(1, kappa * (x(0) + std::sin(t) + s(0)));
    };
    m.sigma = [diff_scale](double, const Vec& x, const Vec&) {
        return Mat::Constant(1, 1, diff_scale * x(0));
    };
    m.db_dx = [kappa](double, const Vec&, const Vec&) { return Mat::Constant(1, 1, kappa); };
    m.dsigma_dx = [diff_scale](double, const Vec&, const Vec&) {
        return std::vector<Mat>{Mat::Constant(1, 1, diff_scale)};
    };
    return m;
}

PresetInstance build_example51(const ParamMap& p) {
    const double kappa = p.at("kappa");
    PresetInstance out;
    out.model = example51_model(kappa, p.at("sigma_scale"));
    out.law = law_from(Vec::Constant(1, p.at("x0")), p.at("init_var"));
    out.fp_grid = {{-8.0}, {8.0}, {800}};
    out.lambda = 0.0;
    // Printed form: +kappa d/dx((x + sin t + I) p) + (1/5) d2/dx2 (x^2 p), i.e. the
    // forward equation of drift -kappa(x + sin t + I) and A = (2/5) x^2.
    // Its p0 = exp(-x^2)/sqrt(2 pi) has mass 1/sqrt(2); normalised it is N(0, 1/2).
    PrintedVariant printed{example51_model(-kappa, std::sqrt(0.4)),
                           law_from(Vec::Zero(1), 0.5),
                           "literal printed Fokker-Planck equation; p0 renormalised to N(0,1/2)"};
    printed.model.name = "example5-1/as-printed";
    out.as_printed = std::move(printed);
    return out;
}

CoefficientModel example52_model(double drift_scale, double offset, double sa, double sb) {
    CoefficientModel m;
    m.name = "example5-2";
    m.d = 2;
    m.m = 2;
    m.autonomous = true;
    m.functionals = {{"damped_sine_product", [](const Vec& y) {
                          return damped_sine(y(0)) * damped_sine(y(1));
                      }, 2}};
    m.b = [=](double, const Vec& x, const Vec& s) {
        const double v = drift_scale * (std::sqrt(x.squaredNorm() + offset) + s(0));
        return Vec::Constant(2, v);
    };
    m.sigma = [=](double, const Vec&, const Vec&) {
        Mat sig(2, 2);
        sig << sa, sb, sb, sa;
        return sig;
    };
    m.db_dx = [=](double, const Vec& x, const Vec&) {
        const double r = std::sqrt(x.squaredNorm() + offset);
        Mat j(2, 2);
        j.row(0) = drift_scale * x.transpose() / r;
        j.row(1) = j.row(0);
        return j;
    };
    m.dsigma_dx = [](double, const Vec&, const Vec&) { return zero_jacobians(2, 2); };
    return m;
}

PresetInstance build_example52(const ParamMap& p) {
    const double offset = p.at("offset");
    if (!(offset > 0.0)) throw ArgumentError("example5-2: offset must be positive");
    const double sa = p.at("sigma_a");
    const double sb = p.at("sigma_b");
    PresetInstance out;
    out.model = example52_model(p.at("drift_scale"), offset, sa, sb);
    out.law = law_from(Vec::Zero(2), p.at("init_var"));
    out.fp_grid = {{-3.0, -3.0}, {5.0, 5.0}, {200, 200}};
    const double a_diag = sa * sa + sb * sb;
    const double a_off = 2.0 * sa * sb;
    out.lambda = a_diag - std::abs(a_off);
    // Printed form carries an extra 0.1 on the transport term.
    PrintedVariant printed{example52_model(0.1 * p.at("drift_scale"), offset, sa, sb), out.law,
                           "literal printed Fokker-Planck equation (0.1 drift factor)"};
    printed.model.name = "example5-2/as-printed";
    out.as_printed = std::move(printed);
    return out;
}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        const double inv_sqrt10 = 1.0 / std::sqrt(10.0);
        std::vector<Entry> e{
            {{"bm", "Brownian motion dX = sigma dW, Gaussian start", "heat-kernel oracle",
              {{"d", 1.0}, {"sigma", 1.0}, {"x0", 0.0}, {"init_var", 1.0}}},
             build_bm},
            {{"example5-1",
              "dX = kappa(X + sin t + E[sin Y/(1+Y^2)])dt + sigma_scale X dW, X0 ~ N(0,1)",
              "published 1D numerical example", {{"kappa", 0.1}, {"sigma_scale", inv_sqrt10},
              {"x0", 0.0}, {"init_var", 1.0}}},
             build_example51},
            {{"example5-2",
              "dX_i = (sqrt(|X|^2 + offset) + E[prod sin Y_j/(1+Y_j^2)])dt + constant 2x2 noise",
              "published 2D numerical example",
              {{"drift_scale", 1.0}, {"offset", 0.4}, {"sigma_a", 2.0 * inv_sqrt10},
               {"sigma_b", inv_sqrt10}, {"init_var", 0.04}}},
             build_example52},
            {{"gbm", "dX = mu X dt + s X dW", "geometric Brownian motion oracle",
              {{"mu", 0.05}, {"s", 0.2}, {"x0", 1.0}, {"init_var", 0.0}}},
             build_gbm},
            {{"meanfield-ou", "dX = (a X + c E[X])dt + s dW", "mean ODE m' = (a + c) m",
              {{"a", -1.0}, {"c", 0.5}, {"s", 0.5}, {"x0", 1.0}, {"init_var", 0.04}}},
             build_meanfield_ou},
            {{"ou", "dX = -theta X dt + sigma dW", "invariant density N(0, sigma^2/(2 theta))",
              {{"theta", 1.0}, {"sigma", std::sqrt(2.0)}, {"x0", 0.0}, {"init_var", 1.0}}},
             build_ou},
        };
        std::sort(e.begin(), e.end(),
                  [](const Entry& a, const Entry& b) { return a.info.name < b.info.name; });
        return e;
    }();
    return entries;
}

}  // namespace

std::vector<PresetInfo> list_presets() {
    std::vector<PresetInfo> out;
    for (const Entry& e : registry()) out.push_back(e.info);
    return out;
}

bool has_preset(const std::string& name) {
    const auto& reg = registry();
    return std::any_of(reg.begin(), reg.end(), [&](const Entry& e) { return e.info.name == name; });
}

PresetInstance make_preset(const std::string& name, const ParamMap& overrides) {
    for (const Entry& e : registry()) {
        if (e.info.name != name) continue;
        ParamMap params = e.info.defaults;
        for (const auto& [key, value] : overrides) {
            auto it = params.find(key);
            if (it == params.end())
                throw ArgumentError("preset '" + name + "' has no parameter '" + key + "'");
            if (!std::isfinite(value))
                throw ArgumentError("preset '" + name + "': parameter '" + key + "' is not finite");
            it->second = value;
        }
        PresetInstance inst = e.build(params);
        inst.info = e.info;
        inst.params = std::move(params);
        return inst;
    }
    throw ArgumentError("unknown preset '" + name + "'");
}

}  // namespace mvsim
