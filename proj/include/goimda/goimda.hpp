#ifndef GOIMDA_GOIMDA_HPP
#define GOIMDA_GOIMDA_HPP

#include "goimda/acquisition.hpp"
#include "goimda/benchfuncs.hpp"
#include "goimda/core.hpp"
#include "goimda/diffcore.hpp"
#include "goimda/expfam.hpp"
#include "goimda/glm.hpp"
#include "goimda/goals.hpp"
#include "goimda/gp.hpp"
#include "goimda/history.hpp"
#include "goimda/ihvp.hpp"
#include "goimda/lowdisc.hpp"
#include "goimda/mlp.hpp"
#include "goimda/models.hpp"
#include "goimda/problems.hpp"
#include "goimda/surrogate.hpp"

#endif  // GOIMDA_GOIMDA_HPP
