#include "widelimit/activation.hpp"

#include <numbers>
#include <sstream>

#include "widelimit/errors.hpp"

namespace widelimit {

Activation::Activation(ActivationKind kind, std::string name, double lipschitz, std::vector<double> breakpoints)
    : kind_(kind), name_(std::move(name)), lipschitz_(lipschitz), breakpoints_(std::move(breakpoints)) {}

Activation Activation::leaky_relu(double slope) {
    if (!(slope >= 0.0 && slope < 1.0)) throw InvalidConfig("leaky_relu slope must lie in [0, 1)");
    Activation a(ActivationKind::LeakyReLU, "leaky_relu", 1.0, {0.0});
    a.slope_ = slope;
    return a;
}

Activation Activation::erf() {
    return Activation(ActivationKind::Erf, "erf", 2.0 / std::sqrt(std::numbers::pi));
}

Activation Activation::custom(std::string name, std::function<double(double)> fn, double lipschitz,
                              std::vector<double> breakpoints) {
    if (!(lipschitz > 0.0)) throw InvalidConfig("custom activation needs a positive Lipschitz constant");
    if (!fn) throw InvalidConfig("custom activation needs a callable");
    Activation a(ActivationKind::Custom, std::move(name), lipschitz, std::move(breakpoints));
    a.fn_ = std::move(fn);
    return a;
}

Activation Activation::parse(const std::string& text) {
    if (text == "identity" || text == "linear") return identity();
    if (text == "relu") return relu();
    if (text == "tanh") return tanh();
    if (text == "erf") return erf();
    if (text == "leaky_relu") return leaky_relu(0.01);
    const std::string prefix = "leaky_relu:";
    if (text.rfind(prefix, 0) == 0) {
        std::istringstream in(text.substr(prefix.size()));
        double slope;
        if (!(in >> slope) || !in.eof()) throw InvalidConfig("bad leaky_relu slope in '" + text + "'");
        return leaky_relu(slope);
    }
    throw InvalidConfig("unknown activation '" + text + "'");
}

std::string Activation::spec_string() const {
    if (kind_ != ActivationKind::LeakyReLU) return name_;
    std::ostringstream out;
    out.precision(17);
    out << "leaky_relu:" << slope_;
    return out.str();
}

}  // namespace widelimit
