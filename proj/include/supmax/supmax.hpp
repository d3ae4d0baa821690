#pragma once

#include "supmax/conditions.hpp"
#include "supmax/error.hpp"
#include "supmax/gaussian_core.hpp"
#include "supmax/harness.hpp"
#include "supmax/interpolation.hpp"
#include "supmax/lemma_integrals.hpp"
#include "supmax/moments.hpp"
#include "supmax/parallel.hpp"
#include "supmax/quadrature.hpp"
#include "supmax/rng.hpp"
#include "supmax/smooth_max.hpp"
