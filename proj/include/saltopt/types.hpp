#ifndef SALTOPT_TYPES_HPP
#define SALTOPT_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace saltopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

/// Named scalar parameters shared by guards, resets and control policies.
/// Values are mutable so optimizers can perturb them; the name->slot layout
/// is fixed once built.
class ParamSet {
 public:
  ParamSet() = default;

  int add(const std::string& name, double value) {
    if (has(name)) throw std::invalid_argument("duplicate parameter: " + name);
    names_.push_back(name);
    values_.push_back(value);
    return static_cast<int>(names_.size()) - 1;
  }

  bool has(const std::string& name) const { return find(name) >= 0; }

  int index(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw std::out_of_range("unknown parameter: " + name);
    return i;
  }

  double get(const std::string& name) const { return values_[static_cast<size_t>(index(name))]; }
  double get(int i) const { return values_[static_cast<size_t>(i)]; }
  void set(const std::string& name, double v) { values_[static_cast<size_t>(index(name))] = v; }
  void set(int i, double v) { values_[static_cast<size_t>(i)] = v; }

  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& values() const { return values_; }

 private:
  int find(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::vector<std::string> names_;
  std::vector<double> values_;
};

/// Numerical tolerances used across simulation and analysis.
struct Tolerances {
  double integ_rel = 1e-10;          // integrator relative tolerance
  double integ_abs = 1e-12;          // integrator absolute tolerance
  double event = 1e-10;              // |g| at an accepted event
  double zeno_dt = 1e-9;             // two events closer than this is a Zeno suspicion
  double transversality = 1e-8;      // |D_t g + D_x g . F| below this is grazing
  double unit_eigenvalue = 1e-6;     // |lambda - 1| window for the flow-direction eigenvalue
  double orbit = 1e-9;               // periodic-orbit closure residual
  double fd_step_scale = 1.4901161193847656e-08;  // sqrt(machine epsilon)
};

inline double fd_step(double value, const Tolerances& tol) {
  return tol.fd_step_scale * std::max(1.0, std::abs(value));
}

}  // namespace saltopt

#endif
