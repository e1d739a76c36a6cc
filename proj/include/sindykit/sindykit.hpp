#pragma once

#include "sindykit/errors.hpp"
#include "sindykit/terms.hpp"
#include "sindykit/dataset.hpp"
#include "sindykit/library.hpp"
#include "sindykit/model.hpp"
#include "sindykit/parallel.hpp"
#include "sindykit/regression.hpp"
#include "sindykit/differentiation.hpp"
#include "sindykit/integrators.hpp"
#include "sindykit/systems.hpp"
#include "sindykit/reduction.hpp"
#include "sindykit/selection.hpp"
#include "sindykit/io.hpp"
#include "sindykit/experiment.hpp"
