// Umbrella header.
#pragma once

#include "mm/codegen.hpp"
#include "mm/decimal.hpp"
#include "mm/decompile.hpp"
#include "mm/diagnostics.hpp"
#include "mm/formula.hpp"
#include "mm/lexer.hpp"
#include "mm/model.hpp"
#include "mm/parser.hpp"
#include "mm/semantics.hpp"
