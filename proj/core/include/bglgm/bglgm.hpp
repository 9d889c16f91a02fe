#pragma once

#include "bglgm/assess.hpp"
#include "bglgm/common.hpp"
#include "bglgm/covariance.hpp"
#include "bglgm/data.hpp"
#include "bglgm/glm.hpp"
#include "bglgm/mcmc.hpp"
#include "bglgm/predict.hpp"
#include "bglgm/raster.hpp"
#include "bglgm/reparam.hpp"
#include "bglgm/sampling.hpp"
