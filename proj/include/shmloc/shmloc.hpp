#pragma once

#include "shmloc/errors.hpp"
#include "shmloc/features.hpp"
#include "shmloc/io.hpp"
#include "shmloc/linalg.hpp"
#include "shmloc/mlp.hpp"
#include "shmloc/novelty.hpp"
#include "shmloc/parallel.hpp"
#include "shmloc/pipeline.hpp"
#include "shmloc/rng.hpp"
#include "shmloc/signals.hpp"
#include "shmloc/synthdata.hpp"
