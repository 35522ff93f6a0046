#include "saltopt/system.hpp"

#include <map>
#include <sstream>

namespace saltopt {

std::vector<std::string> validate_system(const HybridSystem& sys) {
  std::vector<std::string> errors;

  for (int i = 0; i < sys.num_modes(); ++i) {
    const Mode& m = sys.mode(i);
    if (m.state_dim <= 0)
      errors.push_back("mode '" + m.name + "': state dimension must be positive");
    if (!m.field) errors.push_back("mode '" + m.name + "': missing vector field");
  }

  std::map<std::string, std::string> owner;  // shape param -> transition name
  for (int i = 0; i < sys.num_transitions(); ++i) {
    const Transition& tr = sys.transition(i);
    const std::string where = "transition '" + tr.name + "'";
    if (tr.source < 0 || tr.source >= sys.num_modes()) {
      errors.push_back(where + ": unknown source mode " + std::to_string(tr.source));
      continue;
    }
    if (tr.target < 0 || tr.target >= sys.num_modes()) {
      errors.push_back(where + ": unknown target mode " + std::to_string(tr.target));
      continue;
    }
    if (!tr.guard) errors.push_back(where + ": missing guard");
    if (!tr.reset) errors.push_back(where + ": missing reset");

    if (tr.reset) {
      // Probe the reset dimension at a sample point; models whose resets are
      // undefined at the probe are skipped rather than failed.
      const Mode& src = sys.mode(tr.source);
      const Mode& dst = sys.mode(tr.target);
      try {
        Vec out = tr.reset(0.0, Vec::Zero(src.state_dim), Vec::Zero(src.input_dim),
                           sys.default_params);
        if (out.size() != dst.state_dim) {
          std::ostringstream oss;
          oss << where << ": reset emits " << out.size() << " components, target mode '"
              << dst.name << "' has dimension " << dst.state_dim;
          errors.push_back(oss.str());
        }
      } catch (const std::exception&) {
        // probe point outside the reset's domain; dimension checked at runtime
      }
    }

    for (const auto& sp : tr.shape_params) {
      if (!sys.default_params.has(sp))
        errors.push_back(where + ": shape parameter '" + sp + "' is not declared");
      auto it = owner.find(sp);
      if (it != owner.end())
        errors.push_back("shape parameter '" + sp + "' owned by both '" + it->second +
                         "' and '" + tr.name + "'");
      else
        owner[sp] = tr.name;
    }
  }
  return errors;
}

void require_valid(const HybridSystem& sys) {
  auto errors = validate_system(sys);
  if (errors.empty()) return;
  std::string msg = "invalid hybrid system:";
  for (const auto& e : errors) msg += "\n  - " + e;
  throw std::invalid_argument(msg);
}

}  // namespace saltopt
