#pragma once

#include "tpss/common.hpp"
#include "tpss/oned.hpp"
#include "tpss/tensor.hpp"
#include "tpss/split.hpp"
#include "tpss/assembly.hpp"
#include "tpss/physmap.hpp"
#include "tpss/mesh.hpp"
#include "tpss/advect.hpp"
#include "tpss/io.hpp"
