#pragma once

#include "dynamics.hpp"
#include "errors.hpp"
#include "gellmann.hpp"
#include "geometry.hpp"
#include "invariants.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "nodal.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "rabi_fit.hpp"
#include "readout.hpp"
#include "spectral.hpp"
#include "symmetry.hpp"
