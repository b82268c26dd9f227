#pragma once

#include "sticky/clocks.hpp"
#include "sticky/gibbs.hpp"
#include "sticky/models/boids.hpp"
#include "sticky/models/gaussian.hpp"
#include "sticky/models/logistic.hpp"
#include "sticky/models/mixture.hpp"
#include "sticky/models/precision.hpp"
#include "sticky/models/structured_sparsity.hpp"
#include "sticky/models/target.hpp"
#include "sticky/random.hpp"
#include "sticky/samplers/boomerang.hpp"
#include "sticky/samplers/bps.hpp"
#include "sticky/samplers/config.hpp"
#include "sticky/samplers/skeleton.hpp"
#include "sticky/samplers/thaw_selector.hpp"
#include "sticky/samplers/zigzag.hpp"
#include "sticky/state.hpp"
#include "sticky/trace.hpp"
