#ifndef ECHONAV_APP_HPP_
#define ECHONAV_APP_HPP_

#include "echonav/app/config.hpp"
#include "echonav/app/dataset_store.hpp"
#include "echonav/app/model_io.hpp"
#include "echonav/app/nav_bench.hpp"
#include "echonav/app/plot.hpp"
#include "echonav/app/reproduce.hpp"
#include "echonav/app/selftest.hpp"

#endif  // ECHONAV_APP_HPP_
