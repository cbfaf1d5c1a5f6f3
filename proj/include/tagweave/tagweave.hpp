#pragma once

// Umbrella header for the tag-embedding toolkit.

#include "tagweave/classifier.hpp"
#include "tagweave/common.hpp"
#include "tagweave/dataset.hpp"
#include "tagweave/embeddings.hpp"
#include "tagweave/evaluation.hpp"
#include "tagweave/features.hpp"
#include "tagweave/manifest.hpp"
#include "tagweave/matrix_io.hpp"
#include "tagweave/parallel.hpp"
#include "tagweave/pipeline.hpp"
#include "tagweave/rng.hpp"
#include "tagweave/sampling.hpp"
#include "tagweave/synthgen.hpp"
#include "tagweave/version.hpp"
