#pragma once

#include "iadn/numerics/allocator.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/numerics/grad_check.hpp"
#include "iadn/numerics/layer.hpp"
#include "iadn/numerics/tape.hpp"
#include "iadn/numerics/tensor.hpp"
