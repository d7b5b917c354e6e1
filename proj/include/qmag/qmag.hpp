#pragma once

#include "qmag/core.hpp"
#include "qmag/fft.hpp"
#include "qmag/forward.hpp"
#include "qmag/kernels.hpp"
#include "qmag/recon.hpp"
#include "qmag/sensitivity.hpp"
#include "qmag/spin.hpp"
#include "qmag/waveforms.hpp"
