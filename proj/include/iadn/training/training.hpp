#pragma once

#include "iadn/training/anchors.hpp"
#include "iadn/training/assignment.hpp"
#include "iadn/training/box_coding.hpp"
#include "iadn/training/grad_suite.hpp"
#include "iadn/training/losses.hpp"
#include "iadn/training/objective.hpp"
#include "iadn/training/trainer.hpp"
