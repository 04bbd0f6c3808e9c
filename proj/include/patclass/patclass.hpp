#pragma once

// Umbrella header for the patent-classification pipeline.

#include "patclass/checkpoint.hpp"
#include "patclass/config.hpp"
#include "patclass/encoder.hpp"
#include "patclass/errors.hpp"
#include "patclass/ingest.hpp"
#include "patclass/loss.hpp"
#include "patclass/metrics.hpp"
#include "patclass/optimizer.hpp"
#include "patclass/params.hpp"
#include "patclass/rng.hpp"
#include "patclass/tensor.hpp"
#include "patclass/tokenizer.hpp"
#include "patclass/train.hpp"
#include "patclass/vocab.hpp"
