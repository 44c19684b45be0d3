#pragma once

#include "vqakit/error.hpp"
#include "vqakit/text.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/agreement.hpp"
#include "vqakit/linguistics.hpp"
#include "vqakit/analysis.hpp"
#include "vqakit/matrix.hpp"
#include "vqakit/attention.hpp"
#include "vqakit/fusion.hpp"
#include "vqakit/decoder.hpp"
#include "vqakit/gradcheck.hpp"
#include "vqakit/io.hpp"
#include "vqakit/weights.hpp"
#include "vqakit/selfcheck.hpp"
