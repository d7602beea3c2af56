#pragma once

#include "spectr/bench.hpp"
#include "spectr/coupling.hpp"
#include "spectr/decode.hpp"
#include "spectr/drafts.hpp"
#include "spectr/error.hpp"
#include "spectr/otm.hpp"
#include "spectr/prob.hpp"
#include "spectr/rng.hpp"
#include "spectr/simplex.hpp"
#include "spectr/toy_lm.hpp"
#include "spectr/verify.hpp"
