#ifndef BOSONIC_BOSONIC_HPP
#define BOSONIC_BOSONIC_HPP

#include "bosonic/core.hpp"
#include "bosonic/surface_grid.hpp"
#include "bosonic/target_manifold.hpp"
#include "bosonic/background_fields.hpp"
#include "bosonic/action_flow.hpp"
#include "bosonic/ledger.hpp"
#include "bosonic/singularity_analysis.hpp"
#include "bosonic/flow.hpp"
#include "bosonic/regularity_structure.hpp"
#include "bosonic/io.hpp"
#include "bosonic/config.hpp"
#include "bosonic/harness.hpp"

#endif  // BOSONIC_BOSONIC_HPP
