#pragma once

// Umbrella header: the whole analyser in dependency order.

#include "morphparse/common.hpp"
#include "morphparse/rng.hpp"
#include "morphparse/tensor.hpp"
#include "morphparse/graph.hpp"
#include "morphparse/ops.hpp"
#include "morphparse/nn.hpp"
#include "morphparse/adam.hpp"
#include "morphparse/serialize.hpp"
#include "morphparse/conllu.hpp"
#include "morphparse/vocab.hpp"
#include "morphparse/config.hpp"
#include "morphparse/features.hpp"
#include "morphparse/extractors.hpp"
#include "morphparse/encoder.hpp"
#include "morphparse/tagger.hpp"
#include "morphparse/lemmatizer.hpp"
#include "morphparse/parser.hpp"
#include "morphparse/model.hpp"
#include "morphparse/archive.hpp"
#include "morphparse/evaluator.hpp"
#include "morphparse/trainer.hpp"
#include "morphparse/vectorizer.hpp"
#include "morphparse/synthetic.hpp"
