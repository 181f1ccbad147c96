#pragma once

#include "iadn/evaluation/box.hpp"
#include "iadn/evaluation/curve.hpp"
#include "iadn/evaluation/matching.hpp"
#include "iadn/evaluation/nms.hpp"
#include "iadn/evaluation/report.hpp"
