#pragma once

#include "lipschitz_lr/bound_check.hpp"
#include "lipschitz_lr/dataset.hpp"
#include "lipschitz_lr/error.hpp"
#include "lipschitz_lr/harness.hpp"
#include "lipschitz_lr/lipschitz.hpp"
#include "lipschitz_lr/matrix.hpp"
#include "lipschitz_lr/model.hpp"
#include "lipschitz_lr/optimizer.hpp"
#include "lipschitz_lr/presets.hpp"
#include "lipschitz_lr/rng.hpp"
