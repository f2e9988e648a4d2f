#pragma once

#include "pilot_clf/error.hpp"
#include "pilot_clf/numerics.hpp"
#include "pilot_clf/waveform.hpp"
#include "pilot_clf/pilots.hpp"
#include "pilot_clf/classify.hpp"
#include "pilot_clf/hml.hpp"
#include "pilot_clf/experiments.hpp"
#include "pilot_clf/config.hpp"
