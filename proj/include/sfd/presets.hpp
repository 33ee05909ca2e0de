#pragma once

#include <map>
#include <string>

#include "sfd/system.hpp"

namespace sfd {

/// Built-in example systems.  Each ships defaults so it can be loaded
/// without any configuration; every named parameter can be overridden.
enum class PresetId {
  linear_coupled,  ///< coupled slow/stiff oscillators, small stiff inertia
  tet_demo,        ///< essentially nonlinear attachment; no stable fast manifold
  fold_demo,       ///< scalar stiff coordinate whose manifold folds
  twodof_ssm,      ///< two modal oscillators for local-reduction comparisons
  pendulum3,       ///< spring-mass-pendulum assembly (modes: soft-soft-stiff, stiff-stiff-soft)
};

PresetId preset_from_string(const std::string& name);
std::string to_string(PresetId id);

/// Builds a preset system.  `mode` selects the pendulum3 partition and must
/// be empty for the other presets; unknown parameter names throw.
MechanicalSystem load_preset(PresetId id, const std::string& mode = "",
                             const std::map<std::string, Real>& overrides = {});

/// JSON object {system, mode, parameters, eps} with alphabetically sorted
/// keys and round-trip number formatting.
std::string parameter_report(const MechanicalSystem& sys);

}  // namespace sfd
