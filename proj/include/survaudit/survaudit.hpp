#pragma once

#include "survaudit/audit.hpp"
#include "survaudit/common.hpp"
#include "survaudit/concordance.hpp"
#include "survaudit/cox.hpp"
#include "survaudit/curves.hpp"
#include "survaudit/data.hpp"
#include "survaudit/forest.hpp"
#include "survaudit/model_io.hpp"
#include "survaudit/reductions.hpp"
#include "survaudit/smoothc.hpp"
