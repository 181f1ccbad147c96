#pragma once

#include "iadn/netgraph/checkpoint.hpp"
#include "iadn/netgraph/config.hpp"
#include "iadn/netgraph/decode.hpp"
#include "iadn/netgraph/forward.hpp"
#include "iadn/netgraph/network.hpp"
