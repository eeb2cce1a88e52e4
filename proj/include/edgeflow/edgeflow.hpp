// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "edgeflow/cache.hpp"
#include "edgeflow/dist.hpp"
#include "edgeflow/fuse_link.hpp"
#include "edgeflow/graph.hpp"
#include "edgeflow/graph_io.hpp"
#include "edgeflow/hardware.hpp"
#include "edgeflow/interp.hpp"
#include "edgeflow/layout.hpp"
#include "edgeflow/mempool.hpp"
#include "edgeflow/partition.hpp"
#include "edgeflow/plan.hpp"
#include "edgeflow/sim.hpp"
#include "edgeflow/split.hpp"
