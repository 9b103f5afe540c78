#ifndef ECHONAV_NN_HPP_
#define ECHONAV_NN_HPP_

#include "echonav/nn/blas.hpp"
#include "echonav/nn/checkpoint.hpp"
#include "echonav/nn/grad_check.hpp"
#include "echonav/nn/layers.hpp"
#include "echonav/nn/optim.hpp"
#include "echonav/nn/tape.hpp"
#include "echonav/nn/tensor.hpp"

#endif  // ECHONAV_NN_HPP_
