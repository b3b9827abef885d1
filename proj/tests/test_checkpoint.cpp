#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dmk/checkpoint.hpp"
#include "dmk/rng.hpp"

using namespace dmk;

namespace {

// Unique path under the system temp dir, removed when the guard dies.
struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const std::string& name)
        : path(std::filesystem::temp_directory_path() /
               ("dmk_test_" + std::to_string(::getpid()) + "_" + name)) {}
    ~TempFile() { std::filesystem::remove(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("checkpoint round trip restores every bit", "[checkpoint]") {
    Rng rng(99);
    Parameter a("model.a", uniform_tensor({3, 2}, rng, -5.0, 5.0));
    Parameter b("model.b", uniform_tensor({4}, rng, -1e-3, 1e-3));
    a.value[0] = 1.0 / 3.0;  // not exactly representable in decimal
    Tensor a_orig = a.value, b_orig = b.value;

    TempFile file("roundtrip.json");
    save_checkpoint(file.str(), {&a, &b});

    for (double& v : a.value.values()) v = 0.0;
    for (double& v : b.value.values()) v = 0.0;
    load_checkpoint(file.str(), {&a, &b});

    for (std::size_t i = 0; i < a_orig.size(); ++i) REQUIRE(a.value[i] == a_orig[i]);
    for (std::size_t i = 0; i < b_orig.size(); ++i) REQUIRE(b.value[i] == b_orig[i]);
}

TEST_CASE("checkpoint json is a name-keyed object with shape and values", "[checkpoint]") {
    Parameter a("z.last", Tensor::vector({1.5, -2.5}));
    Parameter b("a.first", Tensor::scalar(0.25));
    std::string text = checkpoint_to_json({&a, &b});
    nlohmann::json doc = nlohmann::json::parse(text);
    REQUIRE(doc.size() == 2);
    CHECK(doc.at("z.last").at("shape") == nlohmann::json({2}));
    CHECK(doc.at("z.last").at("values") == nlohmann::json({1.5, -2.5}));
    CHECK(doc.at("a.first").at("values")[0] == 0.25);
    // Keys are emitted sorted by name.
    CHECK(text.find("a.first") < text.find("z.last"));
}

TEST_CASE("checkpoint rejects duplicate parameter names", "[checkpoint]") {
    Parameter a("same", Tensor::scalar(1.0));
    Parameter b("same", Tensor::scalar(2.0));
    REQUIRE_THROWS_WITH(checkpoint_to_json({&a, &b}),
                        Catch::Matchers::ContainsSubstring("same"));
}

TEST_CASE("checkpoint load validates names, shapes, and entry count", "[checkpoint]") {
    Parameter a("m.a", Tensor::vector({1.0, 2.0}));
    Parameter b("m.b", Tensor::scalar(3.0));
    TempFile file("strict.json");
    save_checkpoint(file.str(), {&a, &b});

    SECTION("missing parameter") {
        Parameter c("m.c", Tensor::scalar(0.0));
        REQUIRE_THROWS_WITH(load_checkpoint(file.str(), {&a, &c}),
                            Catch::Matchers::ContainsSubstring("m.c"));
    }
    SECTION("shape mismatch") {
        Parameter wrong("m.a", Tensor::vector({1.0, 2.0, 3.0}));
        REQUIRE_THROWS_WITH(load_checkpoint(file.str(), {&wrong, &b}),
                            Catch::Matchers::ContainsSubstring("m.a"));
    }
    SECTION("extra file entries") {
        REQUIRE_THROWS_WITH(load_checkpoint(file.str(), {&a}),
                            Catch::Matchers::ContainsSubstring("entries"));
    }
    SECTION("invalid json") {
        TempFile bad("bad.json");
        std::ofstream(bad.str()) << "{not json";
        REQUIRE_THROWS_WITH(load_checkpoint(bad.str(), {&a}),
                            Catch::Matchers::ContainsSubstring("JSON"));
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_checkpoint("/nonexistent/nope.json", {&a}), std::runtime_error);
    }
}

TEST_CASE("format_double_exact survives parse round trips", "[checkpoint]") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-12.0, 12.0));
        REQUIRE(std::stod(format_double_exact(v)) == v);
    }
}
