#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "uhr/diagnosis.hpp"

using namespace uhr;

namespace {

// Street scene: three sedans and a bus on one row. The referring expression
// only admits the leftmost and rightmost sedans; the question scope is the
// road band across the top of the frame.
DiagnosisContext street_context() {
    DiagnosisContext ctx;
    ctx.gt_box = GeomBox::hbb(100, 100, 160, 160);
    ctx.gt_category = "sedan";
    ctx.gt_object_id = 0;
    ctx.semantic_region = RectRegion{50, 50, 800, 400};
    ctx.all_objects = {
        {0, "sedan", GeomBox::hbb(100, 100, 160, 160)},
        {1, "sedan", GeomBox::hbb(300, 100, 360, 160)},
        {2, "bus", GeomBox::hbb(500, 100, 580, 180)},
        {3, "sedan", GeomBox::hbb(700, 100, 760, 160)},
    };
    ctx.referring_condition_ids = {0, 3};
    return ctx;
}

ParsedAnswer one_box(double x1, double y1, double x2, double y2) {
    return ParsedAnswer::make_boxes({GeomBox::hbb(x1, y1, x2, y2)});
}

// Long-double reference correlation, coded from the product-moment identity
// rather than the centered two-pass form the library uses.
long double pearson_ld(const std::vector<double>& x, const std::vector<double>& y) {
    const long double n = static_cast<long double>(x.size());
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const long double a = x[i], b = y[i];
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) /
           sqrtl((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// Reference ranking by counting, not sorting: rank of v is the number of
// strictly smaller values plus half the ties plus one half.
std::vector<double> ranks_by_counting(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        size_t below = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) ++below;
            if (w == v[i]) ++equal;
        }
        out[i] = static_cast<double>(below) + (static_cast<double>(equal) + 1.0) / 2.0;
    }
    return out;
}

}  // namespace

TEST_CASE("success label when the judged box clears the overlap bar") {
    const auto ctx = street_context();
    const auto out = diagnose(one_box(100, 100, 160, 160), ctx);
    CHECK(out.label == DiagnosisLabel::kSucc);
    CHECK(out.iou == 1.0);
    CHECK(out.best_overlap_object_id == 0);
}

TEST_CASE("near-miss overlap still counts as success at the default bar") {
    const auto ctx = street_context();
    // iou = 40*60 / (3600 + 3600 - 2400) = 0.5
    const auto out = diagnose(one_box(120, 100, 180, 160), ctx);
    CHECK(out.label == DiagnosisLabel::kSucc);
    CHECK(out.iou == doctest::Approx(0.5));
}

TEST_CASE("instruction failures cover every non-box prediction") {
    const auto ctx = street_context();
    for (const ParsedAnswer& p :
         {ParsedAnswer::invalid("garbled"), ParsedAnswer::make_null(),
          ParsedAnswer::make_count(3), ParsedAnswer::make_option('B'),
          ParsedAnswer::make_boxes({})}) {
        const auto out = diagnose(p, ctx);
        CHECK(out.label == DiagnosisLabel::kIf);
        CHECK(out.iou == 0.0);
        CHECK(out.best_overlap_object_id == -1);
    }
}

TEST_CASE("center outside the question scope wins over the background label") {
    const auto ctx = street_context();
    // Zero overlap with every object too; the scope check must fire first.
    const auto out = diagnose(one_box(100, 500, 160, 560), ctx);
    CHECK(out.label == DiagnosisLabel::kRh);
    CHECK(out.best_overlap_object_id == -1);
}

TEST_CASE("background hit inside the scope touching no object") {
    const auto ctx = street_context();
    const auto out = diagnose(one_box(400, 300, 460, 360), ctx);
    CHECK(out.label == DiagnosisLabel::kOh);
    CHECK(out.iou == 0.0);
    CHECK(out.best_overlap_object_id == -1);
}

TEST_CASE("landing on the wrong category") {
    const auto ctx = street_context();
    const auto out = diagnose(one_box(510, 110, 590, 190), ctx);
    CHECK(out.label == DiagnosisLabel::kCath);
    CHECK(out.best_overlap_object_id == 2);
}

TEST_CASE("right category but outside the referring condition") {
    const auto ctx = street_context();
    const auto out = diagnose(one_box(310, 110, 370, 170), ctx);
    CHECK(out.label == DiagnosisLabel::kCtxh);
    CHECK(out.best_overlap_object_id == 1);
}

TEST_CASE("grazing the true object below the bar is a coarse hit") {
    const auto ctx = street_context();
    const auto out = diagnose(one_box(150, 150, 210, 210), ctx);
    CHECK(out.label == DiagnosisLabel::kCs);
    CHECK(out.iou == doctest::Approx(100.0 / 7100.0));
    CHECK(out.best_overlap_object_id == 0);
}

TEST_CASE("qualifying sibling that is not the answer falls through to other") {
    const auto ctx = street_context();
    // id 3 satisfies the referring condition and shares the category, yet it
    // is not the ground-truth instance.
    const auto out = diagnose(one_box(710, 110, 770, 170), ctx);
    CHECK(out.label == DiagnosisLabel::kOther);
    CHECK(out.best_overlap_object_id == 3);
}

TEST_CASE("empty referring set disables the context label") {
    auto ctx = street_context();
    ctx.referring_condition_ids.clear();
    const auto out = diagnose(one_box(310, 110, 370, 170), ctx);
    CHECK(out.label == DiagnosisLabel::kOther);
}

TEST_CASE("no question scope disables the scope label") {
    auto ctx = street_context();
    ctx.semantic_region.reset();
    const auto out = diagnose(one_box(100, 500, 160, 560), ctx);
    CHECK(out.label == DiagnosisLabel::kOh);
}

TEST_CASE("multi-box predictions are judged by the closest candidate") {
    const auto ctx = street_context();
    const auto out = diagnose(
        ParsedAnswer::make_boxes({GeomBox::hbb(400, 300, 460, 360),
                                  GeomBox::hbb(100, 100, 160, 160)}),
        ctx);
    CHECK(out.label == DiagnosisLabel::kSucc);
    CHECK(out.iou == 1.0);
}

TEST_CASE("labels are invariant to the annotation order") {
    auto ctx = street_context();
    const std::vector<ParsedAnswer> preds = {
        one_box(100, 100, 160, 160), one_box(100, 500, 160, 560),
        one_box(400, 300, 460, 360), one_box(510, 110, 590, 190),
        one_box(310, 110, 370, 170), one_box(150, 150, 210, 210),
        one_box(710, 110, 770, 170)};
    std::vector<DiagnosisOutcome> reference;
    for (const auto& p : preds) reference.push_back(diagnose(p, ctx));

    std::mt19937 rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        std::shuffle(ctx.all_objects.begin(), ctx.all_objects.end(), rng);
        for (size_t i = 0; i < preds.size(); ++i) {
            const auto out = diagnose(preds[i], ctx);
            CHECK(out.label == reference[i].label);
            CHECK(out.iou == reference[i].iou);
            CHECK(out.best_overlap_object_id == reference[i].best_overlap_object_id);
        }
    }
}

TEST_CASE("overlap ties break toward the lower object id") {
    DiagnosisContext ctx;
    ctx.gt_box = GeomBox::hbb(0, 0, 100, 100);
    ctx.gt_category = "thing";
    ctx.gt_object_id = 5;
    ctx.all_objects = {
        {9, "thing", GeomBox::hbb(100, 0, 200, 100)},
        {5, "thing", GeomBox::hbb(0, 0, 100, 100)},
    };
    // Both tiles take a 50x100 slice of the prediction at identical overlap
    // ratios, so only the id can separate them.
    const auto out = diagnose(one_box(50, 0, 150, 100), ctx);
    CHECK(out.best_overlap_object_id == 5);
}

TEST_CASE("equal intersection areas prefer the tighter overlap ratio") {
    DiagnosisContext ctx;
    ctx.gt_box = GeomBox::hbb(0, 0, 100, 100);
    ctx.gt_category = "a";
    ctx.gt_object_id = 1;
    ctx.all_objects = {
        {1, "a", GeomBox::hbb(0, 0, 100, 100)},
        {2, "b", GeomBox::hbb(100, 0, 140, 100)},
    };
    // 4000 shared pixels with each object, but the slim box is half covered
    // while the square is barely a quarter covered.
    const auto out = diagnose(one_box(60, 0, 140, 100), ctx);
    CHECK(out.best_overlap_object_id == 2);
    CHECK(out.label == DiagnosisLabel::kCath);
}

TEST_CASE("ground truth missing from the object list is rejected") {
    auto ctx = street_context();
    ctx.gt_object_id = 42;
    CHECK_THROWS_AS(diagnose(one_box(100, 100, 160, 160), ctx), DiagnosisError);
}

TEST_CASE("label names round-trip") {
    for (const DiagnosisLabel l : kAllDiagnosisLabels)
        CHECK(label_from_name(label_name(l)) == l);
    CHECK(label_name(DiagnosisLabel::kSucc) == "SUCC");
    CHECK(label_name(DiagnosisLabel::kIf) == "IF");
    CHECK(label_name(DiagnosisLabel::kRh) == "RH");
    CHECK(label_name(DiagnosisLabel::kOh) == "OH");
    CHECK(label_name(DiagnosisLabel::kCath) == "CATH");
    CHECK(label_name(DiagnosisLabel::kCtxh) == "CTXH");
    CHECK(label_name(DiagnosisLabel::kCs) == "CS");
    CHECK(label_name(DiagnosisLabel::kOther) == "OTHER");
    CHECK_THROWS_AS(label_from_name("SUCCESS"), DiagnosisError);
}

TEST_CASE("histogram tallies every bucket and scales to percent") {
    using L = DiagnosisLabel;
    const std::vector<L> labels = {L::kSucc, L::kSucc,  L::kSucc, L::kIf,
                                   L::kIf,   L::kOh,    L::kCs,   L::kCs,
                                   L::kOther, L::kOther};
    const auto h = diagnosis_histogram(labels);
    CHECK(h.total == 10);
    CHECK(h.counts.at(L::kSucc) == 3);
    CHECK(h.counts.at(L::kIf) == 2);
    CHECK(h.counts.at(L::kRh) == 0);
    CHECK(h.counts.at(L::kOh) == 1);
    CHECK(h.counts.at(L::kCath) == 0);
    CHECK(h.counts.at(L::kCtxh) == 0);
    CHECK(h.counts.at(L::kCs) == 2);
    CHECK(h.counts.at(L::kOther) == 2);
    CHECK(h.percentages.at(L::kSucc) == 30.0);
    CHECK(h.percentages.at(L::kRh) == 0.0);
    CHECK(h.percentages.at(L::kCs) == 20.0);
    CHECK(h.counts.size() == 8);
    CHECK(h.percentages.size() == 8);
}

TEST_CASE("uniform histogram and empty histogram edge cases") {
    const auto h = diagnosis_histogram({DiagnosisLabel::kSucc, DiagnosisLabel::kSucc});
    CHECK(h.percentages.at(DiagnosisLabel::kSucc) == 100.0);
    CHECK_THROWS_AS(diagnosis_histogram({}), DiagnosisError);
}

TEST_CASE("pearson endpoints and error paths") {
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> up = {2, 4, 6, 8, 10};
    const std::vector<double> down = {5, 4, 3, 2, 1};
    CHECK(pearson(x, up) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(x, down) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_THROWS_AS(pearson(x, {1, 2}), DiagnosisError);
    CHECK_THROWS_AS(pearson({1.0}, {2.0}), DiagnosisError);
    CHECK_THROWS_AS(pearson(x, {7, 7, 7, 7, 7}), DiagnosisError);
}

TEST_CASE("pearson matches a long-double reference on rough data") {
    std::mt19937 rng(202608);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    std::vector<double> x, y;
    for (int i = 0; i < 64; ++i) {
        const double v = static_cast<double>(i) / 8.0;
        x.push_back(v + noise(rng));
        y.push_back(0.4 * v + noise(rng) * 2.0);
    }
    const double got = pearson(x, y);
    const double want = static_cast<double>(pearson_ld(x, y));
    CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("fractional ranks average over ties") {
    const auto r = fractional_ranks({30, 10, 20, 10, 30, 30});
    const std::vector<double> want = {5, 1.5, 3, 1.5, 5, 5};
    CHECK(r == want);
    CHECK(fractional_ranks({}) == std::vector<double>{});
    CHECK(fractional_ranks({4.2}) == std::vector<double>{1});
}

TEST_CASE("fractional ranks agree with the counting reference") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v;
        for (int i = 0; i < 40; ++i) v.push_back(static_cast<double>(coarse(rng)));
        CHECK(fractional_ranks(v) == ranks_by_counting(v));
    }
}

TEST_CASE("spearman sees order, not scale") {
    const std::vector<double> x = {0.1, 0.4, 0.9, 1.7, 2.2, 3.0};
    std::vector<double> bent;
    for (double v : x) bent.push_back(std::exp(v));
    CHECK(spearman(x, bent) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> reversed(x.rbegin(), x.rend());
    CHECK(spearman(x, reversed) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spearman with ties matches the rank-then-correlate reference") {
    const std::vector<double> x = {1, 2, 2, 3, 4, 4, 4, 5};
    const std::vector<double> y = {2, 1, 3, 3, 5, 4, 6, 6};
    const double got = spearman(x, y);
    const double want =
        static_cast<double>(pearson_ld(ranks_by_counting(x), ranks_by_counting(y)));
    CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("spearman rejects a constant input") {
    CHECK_THROWS_AS(spearman({1, 1, 1, 1}, {1, 2, 3, 4}), DiagnosisError);
}
