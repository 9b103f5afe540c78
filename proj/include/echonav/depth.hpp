#ifndef ECHONAV_DEPTH_HPP_
#define ECHONAV_DEPTH_HPP_

#include "echonav/depth/dataset.hpp"
#include "echonav/depth/experiments.hpp"
#include "echonav/depth/metrics.hpp"
#include "echonav/depth/model.hpp"
#include "echonav/depth/train.hpp"

#endif  // ECHONAV_DEPTH_HPP_
