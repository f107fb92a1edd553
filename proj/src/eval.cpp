#include "uhr/eval.hpp"

namespace uhr {

namespace {

ScoreRecord base_record(const Sample& sample, const Prediction& pred) {
    ScoreRecord rec;
    rec.sample_id = sample.id;
    rec.task = sample.task;
    rec.detail["calls"] = static_cast<double>(pred.calls);
    return rec;
}

ScoreRecord invalid_record(ScoreRecord rec) {
    rec.parse_status = ParseStatus::kInvalid;
    rec.raw_score = 0.0;
    return rec;
}

}  // namespace

ScoreRecord score_sample(const Sample& sample, const Prediction& pred) {
    ScoreRecord rec = base_record(sample, pred);
    if (pred.transport_failed) {
        rec.parse_status = ParseStatus::kEmpty;
        rec.raw_score = 0.0;
        return rec;
    }

    switch (sample.answer_format) {
        case AnswerFormat::kBoxHbb:
        case AnswerFormat::kBoxObb: {
            if (pred.answer.kind != AnswerKind::kBoxes || pred.answer.boxes.empty())
                return invalid_record(std::move(rec));
            rec.raw_score = best_box_score(sample.target_boxes.front(), pred.answer.boxes);
            return rec;
        }
        case AnswerFormat::kBoxListHbb:
        case AnswerFormat::kBoxListObb: {
            if (pred.answer.kind != AnswerKind::kBoxes || pred.answer.boxes.empty())
                return invalid_record(std::move(rec));
            MatchResult m = greedy_match(sample.target_boxes, pred.answer.boxes);
            rec.raw_score = soft_f1(m);
            rec.detail["matched"] = static_cast<double>(m.pairs.size());
            rec.detail["fp"] = static_cast<double>(m.fp_count);
            rec.detail["fn"] = static_cast<double>(m.fn_count);
            return rec;
        }
        case AnswerFormat::kMask: {
            if (!pred.mask.has_value()) return invalid_record(std::move(rec));
            RleMask gt = rle_decompress(sample.target_mask, sample.height, sample.width);
            rec.raw_score = s_mask(gt, *pred.mask);
            return rec;
        }
        case AnswerFormat::kCount: {
            if (pred.answer.kind != AnswerKind::kCount)
                return invalid_record(std::move(rec));
            rec.raw_score = counting_score(sample.target_count, pred.answer);
            return rec;
        }
        case AnswerFormat::kOption: {
            if (pred.answer.kind != AnswerKind::kOption)
                return invalid_record(std::move(rec));
            rec.raw_score = option_score(sample.target_option, pred.answer);
            return rec;
        }
    }
    return invalid_record(std::move(rec));
}

Prediction target_as_prediction(const Sample& sample) {
    Prediction pred;
    switch (sample.answer_format) {
        case AnswerFormat::kBoxHbb:
        case AnswerFormat::kBoxObb:
        case AnswerFormat::kBoxListHbb:
        case AnswerFormat::kBoxListObb:
            pred.answer = ParsedAnswer::make_boxes(sample.target_boxes);
            break;
        case AnswerFormat::kMask:
            pred.mask = rle_decompress(sample.target_mask, sample.height, sample.width);
            break;
        case AnswerFormat::kCount:
            pred.answer = ParsedAnswer::make_count(sample.target_count);
            break;
        case AnswerFormat::kOption:
            pred.answer = ParsedAnswer::make_option(sample.target_option);
            break;
    }
    return pred;
}

}  // namespace uhr
