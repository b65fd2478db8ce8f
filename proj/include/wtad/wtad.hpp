#pragma once

#include "wtad/error.hpp"
#include "wtad/time.hpp"
#include "wtad/random.hpp"
#include "wtad/ingest.hpp"
#include "wtad/preprocess.hpp"
#include "wtad/neural.hpp"
#include "wtad/detector.hpp"
#include "wtad/transfer.hpp"
#include "wtad/evaluate.hpp"
#include "wtad/synth.hpp"
