#pragma once

#include "kstate/aggregate.hpp"
#include "kstate/core_model.hpp"
#include "kstate/error.hpp"
#include "kstate/io/csv.hpp"
#include "kstate/io/ingest.hpp"
#include "kstate/io/report.hpp"
#include "kstate/io/svg.hpp"
#include "kstate/io/synth_io.hpp"
#include "kstate/stats.hpp"
#include "kstate/synth.hpp"
