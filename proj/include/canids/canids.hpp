#pragma once

#include "canids/attacks.hpp"
#include "canids/dataset.hpp"
#include "canids/error.hpp"
#include "canids/experiment.hpp"
#include "canids/frame_codec.hpp"
#include "canids/grad.hpp"
#include "canids/metrics.hpp"
#include "canids/models/classifier.hpp"
#include "canids/rng.hpp"
#include "canids/traffic_synth.hpp"
