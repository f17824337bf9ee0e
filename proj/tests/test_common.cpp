#include "fsma/common/errors.hpp"
#include "fsma/common/json_reader.hpp"
#include "fsma/common/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <string>

using namespace fsma;

TEST_CASE("rng sequences depend only on the seed") {
    Rng a(7), b(7), c(8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs = differs || x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("rng draws stay in range and have the right moments") {
    Rng rng(123);
    const int n = 200000;
    double sum = 0.0, sq = 0.0, usum = 0.0;
    std::set<std::uint64_t> seen;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        usum += u;
        const auto k = rng.index(7);
        REQUIRE(k < 7);
        seen.insert(k);
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(seen.size() == 7);
    CHECK(usum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
}

TEST_CASE("derived seeds separate streams") {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t master = 0; master < 20; ++master) {
        for (std::uint64_t stream = 0; stream < 20; ++stream) seeds.insert(derive_seed(master, stream));
    }
    CHECK(seeds.size() == 400);
    CHECK(derive_seed(3, 4) == derive_seed(3, 4));
    static_assert(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("json reader rejects unknown keys and type errors") {
    const nlohmann::json doc = {{"lr", 0.5}, {"steps", 10}, {"inner", {{"a", 1}, {"typo", 2}}}};
    JsonReader reader(doc, "cfg");
    double lr = 0.0;
    int steps = 0;
    reader.read("lr", lr);
    CHECK(lr == 0.5);
    CHECK_THROWS_WITH_AS(reader.finish(), doctest::Contains("cfg.steps"), ValidationError);
    reader.read("steps", steps);
    CHECK(steps == 10);
    auto inner = reader.child("inner");
    reader.finish();
    CHECK(inner.require<int>("a") == 1);
    CHECK_THROWS_WITH_AS(inner.finish(), doctest::Contains("cfg.inner.typo"), ValidationError);
    CHECK_THROWS_AS(inner.require<int>("missing"), ValidationError);

    std::string wrong;
    JsonReader typed(doc, "");
    CHECK_THROWS_AS(typed.read("lr", wrong), ValidationError);
    int untouched = 3;
    typed.read("absent", untouched);
    CHECK(untouched == 3);
    CHECK_THROWS_AS(JsonReader(nlohmann::json::array(), "x"), ValidationError);
    CHECK_THROWS_AS(read_json_file("/nonexistent/config.json"), ValidationError);
}
