#pragma once

#include "fta/common.hpp"
#include "fta/fft_toeplitz.hpp"
#include "fta/pcg.hpp"
#include "fta/toeplitz_inverse.hpp"
#include "fta/residual.hpp"
#include "fta/dare.hpp"
#include "fta/care.hpp"
#include "fta/oracles.hpp"
