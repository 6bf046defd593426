#include <catch_amalgamated.hpp>

#include "driftboost/driftboost.hpp"
#include "helpers.hpp"
#include "properties.hpp"

using namespace driftboost;
namespace tu = testutil;

static void run_prop(const char* name, int cases = -1) {
    auto failure = props::run_property(props::property_by_name(name), 0xDB07, cases);
    INFO(failure.value_or(""));
    REQUIRE(!failure);
}

namespace {

// A small but fully populated bundle: every role, a non-trivial mask, real trees.
ModelBundle sample_bundle() {
    std::mt19937_64 rng(31);
    FeatureSchema schema;
    schema.columns = {{"c", Role::CAT}, {"n", Role::NUM}, {"m", Role::MVC}, {"t", Role::TIME}};
    schema.label = "y";
    schema.positive_label = "1";

    Batch b;
    b.index = 1;
    b.labels = std::vector<int>{};
    for (int r = 0; r < 40; ++r) {
        double z = tu::gaussian(rng);
        b.rows.push_back({z > 0 ? "hi" : "lo", format_double(z),
                          z > 0.5 ? "a,b" : "a", format_int(1000 + r)});
        b.labels->push_back(z + 0.3 * tu::gaussian(rng) > 0 ? 1 : 0);
    }
    if (std::count(b.labels->begin(), b.labels->end(), 1) == 0) (*b.labels)[0] = 1;
    if (std::count(b.labels->begin(), b.labels->end(), 0) == 0) (*b.labels)[0] = 0;

    ModelBundle bundle;
    bundle.schema = schema;
    bundle.stats = compute_window_stats({b}, schema);
    Batch filled = fill_missing(b, schema, bundle.stats);
    bundle.encoders = fit_encoders({filled}, schema);
    auto m = transform_batch(filled, bundle.encoders, schema);

    bundle.selected.assign(m.feature_count, 1);
    bundle.selected[1] = 0;  // drop one column so the mask is non-trivial
    auto masked = select_columns(m, bundle.selected);

    TrainParams params;
    params.num_iterations_max = 3;
    params.early_stopping_rounds = 0;
    params.max_depth = 3;
    bundle.model = train(masked, *b.labels, std::vector<double>(masked.row_count, 0.0), params);
    return bundle;
}

}  // namespace

TEST_CASE("model text begins with the version line and ends with its sentinel") {
    auto bundle = sample_bundle();
    std::string text = model_to_string(bundle);
    CHECK(text.rfind("driftboost-model v1\n", 0) == 0);
    CHECK(text.substr(text.size() - 4) == "end\n");
}

TEST_CASE("serialization is a fixed point after one round trip") {
    auto bundle = sample_bundle();
    std::string text = model_to_string(bundle);
    auto parsed = model_from_string(text);
    CHECK(model_to_string(parsed) == text);
    CHECK(tu::same_model(bundle.model, parsed.model));
    CHECK(parsed.selected == bundle.selected);
    CHECK(parsed.schema.label == "y");
    CHECK(parsed.stats.num_median == bundle.stats.num_median);
    CHECK(parsed.stats.time_min == bundle.stats.time_min);
}

TEST_CASE("file save and load preserve predictions exactly") {
    tu::TempDir dir("model-io");
    auto bundle = sample_bundle();
    save_model(bundle, dir.file("m.txt"));
    auto loaded = load_model(dir.file("m.txt"));

    Batch probe;
    probe.index = 9;
    probe.rows = {{"hi", "0.25", "a,b", "2000"},
                  {"never-seen", "", "", ""},
                  {"lo", "-1.5", "zz", "1234"}};
    CHECK(predict_batch(loaded, probe) == predict_batch(bundle, probe));
}

TEST_CASE("unreadable inputs are reported as such") {
    tu::TempDir dir("model-io-bad");

    SECTION("missing file") {
        REQUIRE_THROWS_WITH(load_model(dir.file("absent.txt")),
                            Catch::Matchers::ContainsSubstring("unreadable model"));
    }
    SECTION("empty file") {
        tu::write_file(dir.file("empty.txt"), "");
        REQUIRE_THROWS_WITH(load_model(dir.file("empty.txt")),
                            Catch::Matchers::ContainsSubstring("unreadable model"));
    }
    SECTION("wrong magic") {
        tu::write_file(dir.file("v2.txt"), "driftboost-model v2\nend\n");
        REQUIRE_THROWS_WITH(load_model(dir.file("v2.txt")),
                            Catch::Matchers::ContainsSubstring("unreadable model"));
    }
    SECTION("truncated body") {
        auto text = model_to_string(sample_bundle());
        auto cut = text.substr(0, text.size() / 2);
        auto nl = cut.rfind('\n');
        REQUIRE_THROWS_AS(model_from_string(cut.substr(0, nl + 1)), DataError);
    }
    SECTION("corrupted numeric field") {
        auto text = model_to_string(sample_bundle());
        auto pos = text.find("params\t");
        REQUIRE(pos != std::string::npos);
        text.replace(pos + 7, 1, "x");
        REQUIRE_THROWS_WITH(model_from_string(text),
                            Catch::Matchers::ContainsSubstring("malformed model"));
    }
}

TEST_CASE("mask popcount must match the model width") {
    auto bundle = sample_bundle();
    auto text = model_to_string(bundle);
    // Flip one selected bit off; the feature count no longer matches.
    auto pos = text.find("selected\t");
    REQUIRE(pos != std::string::npos);
    auto bits = text.find('\t', pos + 9) + 1;
    REQUIRE(text[bits] == '1');
    text[bits] = '0';
    REQUIRE_THROWS_AS(model_from_string(text), DataError);
}

TEST_CASE("persistence invariants hold over random instances") {
    run_prop("model_roundtrip_fidelity");
}
