#pragma once

#include <functional>
#include <string>
#include <utility>

namespace rbsde_lab {

/**
 * Driver f(t, b, y, z, a) of the backward equation, in the solver convention
 * y_i = E[y_{i+1}] + f * dt + (reflection). The declared Lipschitz constants
 * bound |f(.., y, z, a) - f(.., y', z', a)| by L_y |y - y'| + L_z sqrt(a) |z - z'|.
 */
class Generator {
 public:
  using Rule = std::function<double(double t, double b, double y, double z, double a)>;

  Generator(std::string name, Rule rule, double lipschitz_y, double lipschitz_z)
      : name_(std::move(name)), rule_(std::move(rule)), lipschitz_y_(lipschitz_y), lipschitz_z_(lipschitz_z) {}

  double operator()(double t, double b, double y, double z, double a) const { return rule_(t, b, y, z, a); }

  const std::string& name() const { return name_; }
  double lipschitz_y() const { return lipschitz_y_; }
  double lipschitz_z() const { return lipschitz_z_; }

 private:
  std::string name_;
  Rule rule_;
  double lipschitz_y_;
  double lipschitz_z_;
};

inline Generator generator_zero() {
  return {"zero", [](double, double, double, double, double) { return 0.0; }, 0.0, 0.0};
}

/// f = rate * y.
inline Generator generator_affine_y(double rate) {
  return {"affine-y", [rate](double, double, double y, double, double) { return rate * y; },
          rate < 0 ? -rate : rate, 0.0};
}

}  // namespace rbsde_lab
