#pragma once

#include "dwtsum/commands.hpp"
#include "dwtsum/config.hpp"
#include "dwtsum/embedding.hpp"
#include "dwtsum/error.hpp"
#include "dwtsum/eval.hpp"
#include "dwtsum/llm.hpp"
#include "dwtsum/matrix.hpp"
#include "dwtsum/summarizer.hpp"
#include "dwtsum/text.hpp"
#include "dwtsum/wavelet.hpp"
