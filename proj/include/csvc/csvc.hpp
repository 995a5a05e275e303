#pragma once

#include "csvc/codec.hpp"
#include "csvc/errors.hpp"
#include "csvc/eval.hpp"
#include "csvc/frame.hpp"
#include "csvc/intra_codec.hpp"
#include "csvc/measurement.hpp"
#include "csvc/sequence_io.hpp"
#include "csvc/tv_solver.hpp"
