#pragma once

#include "dra/harness/dataset_io.hpp"
#include "dra/harness/experiment.hpp"
#include "dra/harness/report.hpp"
#include "dra/harness/synth.hpp"
