#include <catch_amalgamated.hpp>

#include "driftboost/driftboost.hpp"
#include "helpers.hpp"
#include "properties.hpp"

using namespace driftboost;
namespace tu = testutil;

static void run_prop(const char* name, int cases = -1) {
    auto failure = props::run_property(props::property_by_name(name), 0xDB02, cases);
    INFO(failure.value_or(""));
    REQUIRE(!failure);
}

static FeatureSchema mixed_schema() {
    FeatureSchema s;
    s.columns = {{"c", Role::CAT}, {"n", Role::NUM}, {"m", Role::MVC}, {"t", Role::TIME}};
    s.label = "y";
    s.positive_label = "1";
    return s;
}

static Batch one_batch(int index, std::vector<std::vector<std::string>> rows) {
    Batch b;
    b.index = index;
    b.rows = std::move(rows);
    b.labels = std::vector<int>(b.rows.size(), 0);
    return b;
}

TEST_CASE("output layout is schema-determined") {
    auto layout = output_layout_for(mixed_schema());
    std::vector<std::string> names;
    for (const auto& df : layout) names.push_back(df.name);
    CHECK(names == std::vector<std::string>{"c:ord", "c:freq", "n", "m:count", "m:maxfreq",
                                            "t:epoch", "t:hour", "t:wday"});
}

TEST_CASE("ordinal ids follow first appearance, frequencies count the window") {
    FeatureSchema s;
    s.columns = {{"c", Role::CAT}};
    s.label = "y";
    s.positive_label = "1";
    Batch b = one_batch(1, {{"x"}, {"y"}, {"x"}});

    auto state = fit_encoders({b}, s);
    const auto& ord = state.ordinal_maps.at("c");
    const auto& freq = state.freq_tables.at("c");
    CHECK(ord.at("x") == 1);
    CHECK(ord.at("y") == 2);
    CHECK(freq.at("x") == 2);
    CHECK(freq.at("y") == 1);

    SECTION("single-row window") {
        auto s1 = fit_encoders({one_batch(1, {{"solo"}})}, s);
        CHECK(s1.ordinal_maps.at("c").at("solo") == 1);
        CHECK(s1.freq_tables.at("c").at("solo") == 1);
    }
    SECTION("repeating the batch keeps ids and doubles counts") {
        Batch b2 = b;
        b2.index = 2;
        auto s2 = fit_encoders({b, b2}, s);
        CHECK(s2.ordinal_maps.at("c") == ord);
        CHECK(s2.freq_tables.at("c").at("x") == 4);
        CHECK(s2.freq_tables.at("c").at("y") == 2);
    }
}

TEST_CASE("transform produces the dual CAT encoding") {
    FeatureSchema s;
    s.columns = {{"c", Role::CAT}};
    s.label = "y";
    s.positive_label = "1";
    auto state = fit_encoders({one_batch(1, {{"x"}, {"x"}})}, s);

    Batch probe = one_batch(2, {{"x"}, {"z"}});
    auto m = transform_batch(probe, state, s);
    REQUIRE(m.feature_count == 2);
    CHECK(m.at(0, 0) == 1.0);  // seen token keeps its id
    CHECK(m.at(0, 1) == 2.0);  // and its window count
    CHECK(m.at(1, 0) == 0.0);  // unseen token maps to the reserved zero id
    CHECK(m.at(1, 1) == 0.0);
}

TEST_CASE("time expansion at the epoch origin") {
    FeatureSchema s;
    s.columns = {{"t", Role::TIME}};
    s.label = "y";
    s.positive_label = "1";
    auto state = fit_encoders({one_batch(1, {{"0"}})}, s);
    auto m = transform_batch(one_batch(2, {{"0"}}), state, s);
    CHECK(m.at(0, 0) == 0.0);
    CHECK(m.at(0, 1) == 0.0);
    CHECK(m.at(0, 2) == 3.0);  // 1970-01-01 was a Thursday, Monday=0
}

TEST_CASE("time expansion handles negative epochs") {
    // 1969-12-31 23:00:00 UTC, a Wednesday.
    CHECK(hour_of_day_utc(-3600) == 23);
    CHECK(weekday_utc(-3600) == 2);
    // 86399 is the last second of Thursday 1970-01-01.
    CHECK(hour_of_day_utc(86399) == 23);
    CHECK(weekday_utc(86400) == 4);
}

TEST_CASE("multi-value expansion counts tokens and takes the max window frequency") {
    FeatureSchema s;
    s.columns = {{"m", Role::MVC}};
    s.label = "y";
    s.positive_label = "1";
    // Window frequencies: a appears 5 times, b twice.
    Batch fit = one_batch(1, {{"a,a,a"}, {"a,b"}, {"a,b"}});
    auto state = fit_encoders({fit}, s);
    CHECK(state.mvc_freq.at("m").at("a") == 5);
    CHECK(state.mvc_freq.at("m").at("b") == 2);

    auto m = transform_batch(one_batch(2, {{"a,b,a"}, {"zz"}, {""}}), state, s);
    CHECK(m.at(0, 0) == 3.0);  // duplicates count
    CHECK(m.at(0, 1) == 5.0);
    CHECK(m.at(1, 0) == 1.0);  // unseen token still counts as a token
    CHECK(m.at(1, 1) == 0.0);
    CHECK(m.at(2, 0) == 0.0);  // empty cell has no tokens
    CHECK(m.at(2, 1) == 0.0);
}

TEST_CASE("select_columns keeps masked features in order") {
    auto m = tu::make_matrix(2, 3, {1, 2, 3, 4, 5, 6});
    auto out = select_columns(m, {true, false, true});
    REQUIRE(out.feature_count == 2);
    CHECK(out.feature_names == std::vector<std::string>{"f0", "f2"});
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(0, 1) == 3.0);
    CHECK(out.at(1, 1) == 6.0);

    REQUIRE_THROWS_AS(select_columns(m, {true, false}), DataError);
}

TEST_CASE("fitting on an empty window is rejected") {
    FeatureSchema s = mixed_schema();
    REQUIRE_THROWS_AS(fit_encoders({}, s), DataError);
}

TEST_CASE("encoding invariants hold over random instances") {
    run_prop("encoder_purity");
    run_prop("encoded_width_invariance");
    run_prop("unseen_token_zero");
    run_prop("permutation_frequency_stable");
}
