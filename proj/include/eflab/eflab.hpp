#pragma once

#include "eflab/algebra.hpp"
#include "eflab/banach_pair.hpp"
#include "eflab/battery.hpp"
#include "eflab/evaluator.hpp"
#include "eflab/formula.hpp"
#include "eflab/formula_gen.hpp"
#include "eflab/games.hpp"
#include "eflab/io.hpp"
#include "eflab/parser.hpp"
#include "eflab/random.hpp"
#include "eflab/verify.hpp"
