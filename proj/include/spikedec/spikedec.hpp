#ifndef SPIKEDEC_SPIKEDEC_HPP
#define SPIKEDEC_SPIKEDEC_HPP

#include "spikedec/bufcalc.hpp"
#include "spikedec/config.hpp"
#include "spikedec/error.hpp"
#include "spikedec/fxp.hpp"
#include "spikedec/io.hpp"
#include "spikedec/metrics.hpp"
#include "spikedec/model.hpp"
#include "spikedec/signal.hpp"
#include "spikedec/stream.hpp"
#include "spikedec/synth.hpp"

#endif
