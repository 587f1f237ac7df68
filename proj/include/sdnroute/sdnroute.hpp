#pragma once

#include "sdnroute/agent.hpp"
#include "sdnroute/baseline.hpp"
#include "sdnroute/builtin_topologies.hpp"
#include "sdnroute/errors.hpp"
#include "sdnroute/federated.hpp"
#include "sdnroute/harness.hpp"
#include "sdnroute/netsim.hpp"
#include "sdnroute/neural.hpp"
#include "sdnroute/scenario.hpp"
#include "sdnroute/topology.hpp"
