#pragma once

#include "aobtm/corpus.hpp"
#include "aobtm/evaluation.hpp"
#include "aobtm/gibbs.hpp"
#include "aobtm/online.hpp"
#include "aobtm/snapshot.hpp"
#include "aobtm/tuning.hpp"
#include "aobtm/types.hpp"
