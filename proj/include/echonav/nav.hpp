#ifndef ECHONAV_NAV_HPP_
#define ECHONAV_NAV_HPP_

#include "echonav/nav/agents.hpp"
#include "echonav/nav/env.hpp"
#include "echonav/nav/est_depth.hpp"
#include "echonav/nav/observation.hpp"
#include "echonav/nav/policy.hpp"
#include "echonav/nav/ppo.hpp"
#include "echonav/nav/trajectory.hpp"

#endif  // ECHONAV_NAV_HPP_
