#pragma once

// Umbrella header.

#include "robust_phase/altmin.hpp"
#include "robust_phase/core.hpp"
#include "robust_phase/datagen.hpp"
#include "robust_phase/experiment.hpp"
#include "robust_phase/expression.hpp"
#include "robust_phase/measurement.hpp"
#include "robust_phase/metrics.hpp"
#include "robust_phase/objective.hpp"
#include "robust_phase/oracle.hpp"
#include "robust_phase/random.hpp"
#include "robust_phase/verify.hpp"
