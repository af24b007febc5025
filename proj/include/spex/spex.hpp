// Umbrella header.

#ifndef SPEX_SPEX_HPP
#define SPEX_SPEX_HPP

#include "spex/conditional.hpp"
#include "spex/covariance.hpp"
#include "spex/csv.hpp"
#include "spex/data.hpp"
#include "spex/depmeasures.hpp"
#include "spex/dist.hpp"
#include "spex/fit_models.hpp"
#include "spex/gaussian.hpp"
#include "spex/inference.hpp"
#include "spex/inverted.hpp"
#include "spex/margins.hpp"
#include "spex/maxstable.hpp"
#include "spex/mixtures.hpp"
#include "spex/models.hpp"
#include "spex/mvn.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"
#include "spex/rpareto.hpp"

#endif  // SPEX_SPEX_HPP
