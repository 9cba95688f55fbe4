#pragma once
// Umbrella header.

#include "kgalign/annotator.hpp"
#include "kgalign/config.hpp"
#include "kgalign/dense_reference.hpp"
#include "kgalign/error.hpp"
#include "kgalign/kg.hpp"
#include "kgalign/labels.hpp"
#include "kgalign/llm.hpp"
#include "kgalign/matcher.hpp"
#include "kgalign/pipeline.hpp"
#include "kgalign/reasoning.hpp"
#include "kgalign/refiner.hpp"
#include "kgalign/rng.hpp"
#include "kgalign/selector.hpp"
#include "kgalign/synth.hpp"
