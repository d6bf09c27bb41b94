#pragma once
// Umbrella header: the full toolkit in one include.

#include "anosov/common.hpp"
#include "anosov/summation.hpp"
#include "anosov/parallel.hpp"
#include "anosov/rng.hpp"
#include "anosov/int_matrix.hpp"
#include "anosov/map.hpp"
#include "anosov/cones.hpp"
#include "anosov/periodic.hpp"
#include "anosov/conjugacy.hpp"
#include "anosov/splitting.hpp"
#include "anosov/potential.hpp"
#include "anosov/ensemble.hpp"
#include "anosov/leaf.hpp"
#include "anosov/leaf_measure.hpp"
#include "anosov/dimension.hpp"
#include "anosov/rigidity.hpp"
#include "anosov/config.hpp"
#include "anosov/io.hpp"
#include "anosov/reports.hpp"
