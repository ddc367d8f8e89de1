#pragma once

// Tree-Wasserstein distance with learned edge weights: umbrella header.

#include "treew/common.hpp"
#include "treew/eval.hpp"
#include "treew/exact_ot.hpp"
#include "treew/measure.hpp"
#include "treew/path_features.hpp"
#include "treew/point_cloud.hpp"
#include "treew/tree.hpp"
#include "treew/tree_build.hpp"
#include "treew/weight_fit.hpp"
