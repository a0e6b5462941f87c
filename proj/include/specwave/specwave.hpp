#pragma once

#include "specwave/assembly.hpp"
#include "specwave/config.hpp"
#include "specwave/error.hpp"
#include "specwave/gll.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"
#include "specwave/mesh_io.hpp"
#include "specwave/solver.hpp"
#include "specwave/source.hpp"
#include "specwave/validation.hpp"
#include "specwave/vec3.hpp"
