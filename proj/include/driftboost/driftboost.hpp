#pragma once

// Umbrella for the library proper. The CLI layer (cli.hpp) is excluded so
// library users do not inherit the CLI11 dependency.

#include "driftboost/util.hpp"
#include "driftboost/ingest.hpp"
#include "driftboost/encode.hpp"
#include "driftboost/metrics.hpp"
#include "driftboost/gbdt.hpp"
#include "driftboost/pipeline.hpp"
#include "driftboost/model_io.hpp"
#include "driftboost/synth.hpp"
