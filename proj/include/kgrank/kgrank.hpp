#pragma once

#include "kgrank/cli.hpp"
#include "kgrank/decode.hpp"
#include "kgrank/eval.hpp"
#include "kgrank/kg.hpp"
#include "kgrank/kge.hpp"
#include "kgrank/rerank.hpp"
#include "kgrank/retriever.hpp"
#include "kgrank/synthetic.hpp"
#include "kgrank/types.hpp"
#include "kgrank/util.hpp"
#include "kgrank/verbalizer.hpp"
