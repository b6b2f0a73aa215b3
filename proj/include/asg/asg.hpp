#pragma once

// Umbrella header: the whole library in one include.

#include "asg/errors.hpp"
#include "asg/graph.hpp"
#include "asg/graph_io.hpp"
#include "asg/ioc.hpp"
#include "asg/kx.hpp"
#include "asg/metrics.hpp"
#include "asg/model.hpp"
#include "asg/pipeline.hpp"
#include "asg/repair.hpp"
#include "asg/repair_logic.hpp"
#include "asg/rule_catalog.hpp"
#include "asg/rules.hpp"
#include "asg/verify.hpp"
