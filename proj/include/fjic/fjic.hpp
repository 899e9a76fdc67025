#pragma once

#include "fjic/errors.hpp"
#include "fjic/linalg.hpp"
#include "fjic/model.hpp"
#include "fjic/control.hpp"
#include "fjic/transform.hpp"
#include "fjic/polynomial.hpp"
#include "fjic/lti.hpp"
#include "fjic/integrator.hpp"
#include "fjic/sim.hpp"
