#pragma once

#include <hsiseg/error.hpp>
#include <hsiseg/types.hpp>
#include <hsiseg/io/envi.hpp>
#include <hsiseg/io/raster.hpp>
#include <hsiseg/pseudo_rgb.hpp>
#include <hsiseg/scf.hpp>
#include <hsiseg/fusion.hpp>
#include <hsiseg/rgb_branch.hpp>
#include <hsiseg/pipeline.hpp>
#include <hsiseg/eval/components.hpp>
#include <hsiseg/eval/clicks.hpp>
#include <hsiseg/eval/metrics.hpp>
#include <hsiseg/eval/evaluate.hpp>
#include <hsiseg/synth.hpp>
#include <hsiseg/train.hpp>
#include <hsiseg/io/clicks_json.hpp>
