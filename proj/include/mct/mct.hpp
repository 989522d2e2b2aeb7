#pragma once
// Umbrella header for the multilevel composite transportation library.
#include "mct/barycenter.hpp"
#include "mct/dataset.hpp"
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/io.hpp"
#include "mct/metrics.hpp"
#include "mct/mixture.hpp"
#include "mct/multilevel.hpp"
#include "mct/numeric.hpp"
#include "mct/ot.hpp"
#include "mct/random.hpp"
#include "mct/svg.hpp"
#include "mct/synthetic.hpp"
