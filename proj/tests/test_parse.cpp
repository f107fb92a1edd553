#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>

#include "uhr/parse.hpp"

using namespace uhr;

TEST_CASE("final segment extraction") {
    CHECK(extract_final_segment("reasoning...\nFinal answer: [10,20,30,40]") ==
          " [10,20,30,40]");
    CHECK(extract_final_segment("Final answer: A\nmore\nFinal answer: B") == " B");
    CHECK(extract_final_segment("no marker here") == "no marker here");
    // Mid-line mention is not a marker.
    CHECK(extract_final_segment("the Final answer: thing") == "the Final answer: thing");
}

TEST_CASE("single box parsing") {
    const auto a = parse_boxes("[100, 200, 300, 400]", ExpectedBox::kHbb, false);
    REQUIRE(a.kind == AnswerKind::kBoxes);
    REQUIRE(a.boxes.size() == 1);
    CHECK(a.boxes[0].kind == BoxKind::HBB);
    CHECK(a.boxes[0].coords == std::vector<double>{100, 200, 300, 400});

    // Misordered corners are rejected, not swapped.
    const auto bad = parse_boxes("[300,100,100,200]", ExpectedBox::kHbb, false);
    CHECK(bad.kind == AnswerKind::kInvalid);
    CHECK(bad.invalid_reason == "no valid box");

    const auto obb = parse_boxes("[0,0,10,0,10,10,0,10]", ExpectedBox::kObb, false);
    REQUIRE(obb.kind == AnswerKind::kBoxes);
    CHECK(obb.boxes[0].kind == BoxKind::OBB);

    const auto wrong = parse_boxes("[0,0,10,0,10,10,0,10]", ExpectedBox::kHbb, false);
    CHECK(wrong.kind == AnswerKind::kInvalid);
    CHECK(wrong.invalid_reason == "wrong format");

    const auto none = parse_boxes("I cannot find it.", ExpectedBox::kHbb, false);
    CHECK(none.kind == AnswerKind::kInvalid);
    CHECK(none.invalid_reason == "no valid box");
}

TEST_CASE("multi box parsing") {
    const auto a = parse_boxes("[[1,2,3,4],[5,6,7,8]]", ExpectedBox::kHbb, true);
    REQUIRE(a.kind == AnswerKind::kBoxes);
    CHECK(a.boxes.size() == 2);

    // Invalid members are dropped, valid ones kept.
    const auto b = parse_boxes("[[1,2,3,4],[9,9,2,2]]", ExpectedBox::kHbb, true);
    REQUIRE(b.kind == AnswerKind::kBoxes);
    CHECK(b.boxes.size() == 1);

    // Prose around the list is fine.
    const auto c = parse_boxes("The tanks are at [10,20,30,40] and [50,60,70,80].",
                               ExpectedBox::kHbb, true);
    REQUIRE(c.kind == AnswerKind::kBoxes);
    CHECK(c.boxes.size() == 2);

    // Decimal coordinates are accepted for boxes.
    const auto d = parse_boxes("[10.5, 20.25, 30.0, 40.75]", ExpectedBox::kHbb, false);
    REQUIRE(d.kind == AnswerKind::kBoxes);
    CHECK(d.boxes[0].coords[1] == doctest::Approx(20.25));
}

TEST_CASE("final segment bounds box search") {
    const auto a = parse_boxes("Maybe [1,2,3,4]?\nFinal answer: [5,6,7,8]",
                               ExpectedBox::kHbb, false);
    REQUIRE(a.kind == AnswerKind::kBoxes);
    REQUIRE(a.boxes.size() == 1);
    CHECK(a.boxes[0].coords == std::vector<double>{5, 6, 7, 8});
}

TEST_CASE("count parsing") {
    const auto a = parse_count("There are 12 vehicles.");
    REQUIRE(a.kind == AnswerKind::kCount);
    CHECK(a.count == 12);

    CHECK(parse_count("Maybe 10 or 12.").kind == AnswerKind::kInvalid);
    CHECK(parse_count("Maybe 10 or 12.").invalid_reason == "conflicting numbers");

    const auto rep = parse_count("I count 10, 10, and 10.");
    REQUIRE(rep.kind == AnswerKind::kCount);
    CHECK(rep.count == 10);

    CHECK(parse_count("none that I can see").invalid_reason == "no count");
    CHECK(parse_count("-3").invalid_reason == "negative count");
    // A decimal total is not an exact integer.
    CHECK(parse_count("roughly 3.5").invalid_reason == "no count");
    // The marker isolates one of several numbers.
    const auto iso = parse_count("Could be 4 or 5.\nFinal answer: 5");
    REQUIRE(iso.kind == AnswerKind::kCount);
    CHECK(iso.count == 5);
    CHECK(parse_count("0").count == 0);
}

TEST_CASE("option parsing") {
    CHECK(parse_option("The answer is A", "ABCD").option == 'A');
    CHECK(parse_option("a.", "ABCD").option == 'A');
    CHECK(parse_option("Option C", "ABCD").option == 'C');
    CHECK(parse_option("(B)", "ABCD").option == 'B');
    CHECK(parse_option("A or B", "ABCD").kind == AnswerKind::kInvalid);
    CHECK(parse_option("A or B", "ABCD").invalid_reason == "conflicting options");
    CHECK(parse_option("I don't know", "ABCD").invalid_reason == "no option");
    // Letters outside the label set do not count.
    CHECK(parse_option("E", "ABCD").kind == AnswerKind::kInvalid);
    CHECK(parse_option("Final answer: D", "ABCD").option == 'D');
}

TEST_CASE("point list parsing") {
    const auto pts = parse_points("[[100,200],[300,400]]", 10);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].x == 100);
    CHECK(pts[1].y == 400);

    CHECK(parse_points("[[100,200,300]]", 10).empty());
    const auto one = parse_points("Here are the anchors: [[500,500]]", 10);
    REQUIRE(one.size() == 1);
    CHECK(one[0].x == 500);

    // Budget caps the list.
    const auto capped = parse_points("[[1,1],[2,2],[3,3],[4,4]]", 2);
    CHECK(capped.size() == 2);
    CHECK(parse_points("no points at all", 4).empty());
}

TEST_CASE("local answers") {
    CHECK(parse_local_answer("null", AnswerFormat::kBoxHbb).kind == AnswerKind::kNull);
    CHECK(parse_local_answer("NULL.", AnswerFormat::kCount).kind == AnswerKind::kNull);
    CHECK(parse_local_answer("  Null ", AnswerFormat::kOption).kind == AnswerKind::kNull);
    const auto box = parse_local_answer("[10,10,50,50]", AnswerFormat::kBoxHbb);
    REQUIRE(box.kind == AnswerKind::kBoxes);
    CHECK(box.boxes[0].coords == std::vector<double>{10, 10, 50, 50});
    CHECK(parse_local_answer("7", AnswerFormat::kCount).count == 7);
    CHECK(parse_local_answer("B", AnswerFormat::kOption).option == 'B');
    // Mask targets are predicted through a horizontal box prompt.
    const auto prompt = parse_local_answer("[1,2,3,4]", AnswerFormat::kMask);
    CHECK(prompt.kind == AnswerKind::kBoxes);
    // "nullify" is not the null token.
    CHECK(parse_local_answer("nullify", AnswerFormat::kCount).kind == AnswerKind::kInvalid);
}

TEST_CASE("reparsing a rendering reproduces the boxes") {
    const std::string texts[] = {
        "[100,200,300,400]",
        "[[1,2,3,4],[5,6,7,8],[2,3,9,9]]",
        "boxes: [10.5,20,30.5,40] and [3,4,5,6]",
    };
    for (const auto& t : texts) {
        const auto first = parse_boxes(t, ExpectedBox::kHbb, true);
        REQUIRE(first.kind == AnswerKind::kBoxes);
        const auto again = parse_boxes(render_boxes(first.boxes), ExpectedBox::kHbb, true);
        REQUIRE(again.kind == AnswerKind::kBoxes);
        REQUIRE(again.boxes.size() == first.boxes.size());
        for (size_t i = 0; i < first.boxes.size(); ++i) {
            CHECK(again.boxes[i].coords == first.boxes[i].coords);
        }
    }
}

TEST_CASE("answer format names round-trip") {
    for (AnswerFormat f :
         {AnswerFormat::kBoxHbb, AnswerFormat::kBoxObb, AnswerFormat::kBoxListHbb,
          AnswerFormat::kBoxListObb, AnswerFormat::kMask, AnswerFormat::kCount,
          AnswerFormat::kOption}) {
        CHECK(parse_answer_format(answer_format_name(f)) == f);
    }
    CHECK_THROWS(parse_answer_format("boxes"));
    CHECK(is_box_format(AnswerFormat::kBoxListObb));
    CHECK_FALSE(is_box_format(AnswerFormat::kMask));
    CHECK(is_multi_box_format(AnswerFormat::kBoxListHbb));
    CHECK_FALSE(is_multi_box_format(AnswerFormat::kBoxHbb));
}

TEST_CASE("parsers survive random byte strings") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 80);
    // Bias toward structural characters so bracket paths get exercised.
    const std::string structural = "[],.0123456789-+ \nFinal answer:";
    for (int trial = 0; trial < 2000; ++trial) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            if (rng() % 2) {
                s.push_back(structural[rng() % structural.size()]);
            } else {
                s.push_back(static_cast<char>(byte(rng)));
            }
        }
        for (AnswerFormat f :
             {AnswerFormat::kBoxHbb, AnswerFormat::kBoxListObb, AnswerFormat::kMask,
              AnswerFormat::kCount, AnswerFormat::kOption}) {
            const ParsedAnswer a = parse_local_answer(s, f);
            if (a.kind == AnswerKind::kBoxes) {
                CHECK(!a.boxes.empty());
                for (const auto& b : a.boxes) CHECK(is_valid(b));
            } else if (a.kind == AnswerKind::kCount) {
                CHECK(a.count >= 0);
            } else if (a.kind == AnswerKind::kOption) {
                CHECK(std::string("ABCDEF").find(a.option) != std::string::npos);
            } else if (a.kind == AnswerKind::kInvalid) {
                CHECK(!a.invalid_reason.empty());
            }
        }
        parse_points(s, 8);
    }
}
