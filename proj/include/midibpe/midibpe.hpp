// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include "midibpe/bpe.hpp"
#include "midibpe/corpus.hpp"
#include "midibpe/error.hpp"
#include "midibpe/geometry.hpp"
#include "midibpe/grammar.hpp"
#include "midibpe/json_io.hpp"
#include "midibpe/metrics.hpp"
#include "midibpe/midi_io.hpp"
#include "midibpe/score.hpp"
#include "midibpe/tokenizer.hpp"
#include "midibpe/version.hpp"
#include "midibpe/vocabulary.hpp"
