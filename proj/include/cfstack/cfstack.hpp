#pragma once

// Umbrella header.
#include "cfstack/clustered_models.hpp"
#include "cfstack/clustering.hpp"
#include "cfstack/config.hpp"
#include "cfstack/data.hpp"
#include "cfstack/federation.hpp"
#include "cfstack/lr_schedule.hpp"
#include "cfstack/metrics.hpp"
#include "cfstack/model_selection.hpp"
#include "cfstack/nn.hpp"
#include "cfstack/pipeline.hpp"
