#pragma once

// Umbrella header: audio inpainting under a low-rank Gaussian
// time-frequency model.

#include "nmfip/degrade.hpp"
#include "nmfip/errors.hpp"
#include "nmfip/estimators.hpp"
#include "nmfip/experiment.hpp"
#include "nmfip/framing.hpp"
#include "nmfip/metrics.hpp"
#include "nmfip/nmf.hpp"
#include "nmfip/signal.hpp"
#include "nmfip/transforms.hpp"
#include "nmfip/wav.hpp"
