#pragma once

#include "zwanzig/policy.hpp"
#include "zwanzig/errors.hpp"
#include "zwanzig/hilbert.hpp"
#include "zwanzig/state.hpp"
#include "zwanzig/spectral.hpp"
#include "zwanzig/liouville.hpp"
#include "zwanzig/dynamics.hpp"
#include "zwanzig/rng.hpp"
#include "zwanzig/random.hpp"
#include "zwanzig/relevance.hpp"
#include "zwanzig/master.hpp"
#include "zwanzig/measurement.hpp"
#include "zwanzig/scenario.hpp"
