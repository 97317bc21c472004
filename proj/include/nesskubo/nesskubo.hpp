#ifndef NESSKUBO_NESSKUBO_HPP
#define NESSKUBO_NESSKUBO_HPP

#include "nesskubo/core.hpp"
#include "nesskubo/lattice_model.hpp"
#include "nesskubo/spectral.hpp"
#include "nesskubo/dissipative_ness.hpp"
#include "nesskubo/kubo_conductivity.hpp"
#include "nesskubo/bloch.hpp"
#include "nesskubo/oracles.hpp"

#endif  // NESSKUBO_NESSKUBO_HPP
