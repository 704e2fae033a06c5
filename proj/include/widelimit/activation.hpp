#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace widelimit {

enum class ActivationKind { Identity, ReLU, LeakyReLU, Tanh, Erf, Custom };

// Scalar activation. Builtins are evaluated through a switch; Custom wraps a
// user function with a declared (trusted) Lipschitz constant.
class Activation {
public:
    Activation() = default;

    static Activation identity() { return Activation(ActivationKind::Identity, "identity", 1.0); }
    static Activation relu() { return Activation(ActivationKind::ReLU, "relu", 1.0, {0.0}); }
    static Activation leaky_relu(double slope);
    static Activation tanh() { return Activation(ActivationKind::Tanh, "tanh", 1.0); }
    // erf(x), Lipschitz constant 2/sqrt(pi).
    static Activation erf();
    static Activation custom(std::string name, std::function<double(double)> fn, double lipschitz,
                             std::vector<double> breakpoints = {});

    // Accepts identity, relu, tanh, erf, leaky_relu and leaky_relu:<slope>.
    static Activation parse(const std::string& text);

    double operator()(double x) const {
        switch (kind_) {
            case ActivationKind::Identity: return x;
            case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
            case ActivationKind::LeakyReLU: return x > 0.0 ? x : slope_ * x;
            case ActivationKind::Tanh: return std::tanh(x);
            case ActivationKind::Erf: return std::erf(x);
            case ActivationKind::Custom: return fn_(x);
        }
        return 0.0;
    }

    ActivationKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    double slope() const { return slope_; }
    double lipschitz() const { return lipschitz_; }
    // Points where the activation is not smooth; quadrature splits there.
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    // Canonical text accepted by parse(); custom activations return their name.
    std::string spec_string() const;

private:
    Activation(ActivationKind kind, std::string name, double lipschitz, std::vector<double> breakpoints = {});

    ActivationKind kind_ = ActivationKind::Identity;
    std::string name_ = "identity";
    double slope_ = 0.0;
    double lipschitz_ = 1.0;
    std::vector<double> breakpoints_;
    std::function<double(double)> fn_;
};

}  // namespace widelimit
