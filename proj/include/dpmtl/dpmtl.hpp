#pragma once

#include "dpmtl/autodiff.hpp"
#include "dpmtl/checkpoint.hpp"
#include "dpmtl/csv.hpp"
#include "dpmtl/data.hpp"
#include "dpmtl/errors.hpp"
#include "dpmtl/experiment.hpp"
#include "dpmtl/linalg.hpp"
#include "dpmtl/loss.hpp"
#include "dpmtl/metrics.hpp"
#include "dpmtl/models.hpp"
#include "dpmtl/rng.hpp"
#include "dpmtl/score_prediction.hpp"
#include "dpmtl/split.hpp"
#include "dpmtl/synth.hpp"
#include "dpmtl/tensor.hpp"
#include "dpmtl/train.hpp"
