#pragma once

#include <optional>
#include <string>

#include "uhr/dataset.hpp"
#include "uhr/metrics.hpp"
#include "uhr/parse.hpp"
#include "uhr/rle.hpp"

namespace uhr {

/// Final pipeline output for one sample, ready for scoring.
struct Prediction {
    ParsedAnswer answer;
    std::optional<RleMask> mask;  // segmentation samples only
    bool transport_failed = false;
    std::string error;
    int calls = 0;
};

/// Scores a prediction against the sample's stored target. Transport
/// failures become EMPTY, payloads of the wrong kind become INVALID, and
/// both score 0. Mask samples are scored on the mask alone; the box the
/// model produced is only the segmenter prompt. Spent calls are kept in
/// detail["calls"].
ScoreRecord score_sample(const Sample& sample, const Prediction& pred);

/// The sample's own target repackaged as a prediction, for oracle and
/// self-consistency checks.
Prediction target_as_prediction(const Sample& sample);

}  // namespace uhr
