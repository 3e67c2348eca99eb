#pragma once

#include "analysis.hpp"
#include "common.hpp"
#include "experiment.hpp"
#include "fsio.hpp"
#include "metrics.hpp"
#include "reconstruct.hpp"
#include "restore.hpp"
#include "specio.hpp"
#include "stft.hpp"
#include "synth.hpp"
#include "wav.hpp"
