#pragma once

#include "rotamix/assessment.hpp"
#include "rotamix/io.hpp"
#include "rotamix/mixture.hpp"
#include "rotamix/parallel.hpp"
#include "rotamix/point_set.hpp"
#include "rotamix/prior.hpp"
#include "rotamix/random.hpp"
#include "rotamix/rotation.hpp"
#include "rotamix/sampler.hpp"
#include "rotamix/stats.hpp"
