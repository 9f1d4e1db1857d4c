#pragma once

#include "textunlock/cbm.hpp"
#include "textunlock/checkpoint.hpp"
#include "textunlock/concept_filter.hpp"
#include "textunlock/error.hpp"
#include "textunlock/interventions.hpp"
#include "textunlock/io.hpp"
#include "textunlock/loss.hpp"
#include "textunlock/mapper.hpp"
#include "textunlock/matrix.hpp"
#include "textunlock/optim.hpp"
#include "textunlock/random.hpp"
#include "textunlock/trainer.hpp"
#include "textunlock/zeroshot_head.hpp"
