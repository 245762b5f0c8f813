#pragma once

#include "sgwinv/config.hpp"
#include "sgwinv/error.hpp"
#include "sgwinv/forward.hpp"
#include "sgwinv/graph.hpp"
#include "sgwinv/matrix_io.hpp"
#include "sgwinv/mesh.hpp"
#include "sgwinv/metrics.hpp"
#include "sgwinv/pipeline.hpp"
#include "sgwinv/simulation.hpp"
#include "sgwinv/solvers/common.hpp"
#include "sgwinv/solvers/mce.hpp"
#include "sgwinv/solvers/mne.hpp"
#include "sgwinv/solvers/sbl.hpp"
#include "sgwinv/solvers/svbsccd.hpp"
#include "sgwinv/transport.hpp"
#include "sgwinv/wavelets.hpp"
