#pragma once

#include "wafp/common.hpp"
#include "wafp/config.hpp"
#include "wafp/functions.hpp"
#include "wafp/io.hpp"
#include "wafp/metrics.hpp"
#include "wafp/nn.hpp"
#include "wafp/optim.hpp"
#include "wafp/oracle.hpp"
#include "wafp/problem.hpp"
#include "wafp/problems.hpp"
#include "wafp/pushforward.hpp"
#include "wafp/rng.hpp"
#include "wafp/run.hpp"
#include "wafp/sampler.hpp"
#include "wafp/testfn.hpp"
#include "wafp/trainer.hpp"
