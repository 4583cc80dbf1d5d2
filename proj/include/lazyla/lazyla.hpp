#pragma once

#include "lazyla/backend.hpp"
#include "lazyla/context.hpp"
#include "lazyla/decomp.hpp"
#include "lazyla/error.hpp"
#include "lazyla/expr.hpp"
#include "lazyla/interop.hpp"
#include "lazyla/lowering.hpp"
#include "lazyla/mat.hpp"
#include "lazyla/registry.hpp"
#include "lazyla/types.hpp"
