#pragma once

#include "pelnas/arch_space.hpp"
#include "pelnas/benchmark_store.hpp"
#include "pelnas/coevolve_operator.hpp"
#include "pelnas/config.hpp"
#include "pelnas/engine.hpp"
#include "pelnas/errors.hpp"
#include "pelnas/objectives.hpp"
#include "pelnas/predictor.hpp"
#include "pelnas/report_io.hpp"
#include "pelnas/rng.hpp"
#include "pelnas/store_io.hpp"
#include "pelnas/text_service.hpp"
#include "pelnas/text_util.hpp"
