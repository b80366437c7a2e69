#include "doctest.h"

#include "adaptq/curriculum.hpp"
#include "adaptq/errors.hpp"
#include "support.hpp"

using namespace adaptq;
using testing::TempDir;

TEST_CASE("bundled grade9-math lists the six chapters") {
  Curriculum c = testing::grade9_math();
  REQUIRE(c.subjects().size() == 2);
  const Subject* numbers = c.find_subject("Numbers");
  REQUIRE(numbers != nullptr);
  CHECK(numbers->grade == 9);
  CHECK(numbers->chapters == std::vector<std::string>{
                                 "Powers with decimal and fractional bases",
                                 "Conversion between standard and scientific notation",
                                 "Division with exponents - integral bases"});
  const Subject* finance = c.find_subject("Financial Mathematics");
  REQUIRE(finance != nullptr);
  CHECK(finance->chapters ==
        std::vector<std::string>{"Simple interest", "Compound interest", "Balance a budget"});
  CHECK(c.chapters().size() == 6);
}

TEST_CASE("resolve") {
  Curriculum math = testing::grade9_math();
  CHECK_FALSE(resolve(math, {"Numbers", "Simple interest"}));
  CHECK(resolve(math, {"Financial Mathematics", "Compound interest"}));
  CHECK(resolve(testing::grade9_algebra(), {"Algebra", "Solve linear equations: word problems"}));
  CHECK(math.grade_of({"Numbers", "Powers with decimal and fractional bases"}) == 9);
  CHECK_THROWS_AS(math.grade_of({"Numbers", "nope"}), ValidationError);
}

TEST_CASE("invalid curricula are rejected") {
  TempDir dir;
  SUBCASE("zero subjects") {
    write_file(dir / "c.json", R"({"subjects": []})");
    CHECK_THROWS_AS(load_curriculum(dir / "c.json"), ValidationError);
  }
  SUBCASE("duplicate chapter") {
    write_file(dir / "c.json",
               R"({"subjects": [{"name": "Financial Mathematics", "grade": 9,
                   "chapters": ["Simple interest", "Simple interest"]}]})");
    CHECK_THROWS_AS(load_curriculum(dir / "c.json"), ValidationError);
  }
  SUBCASE("duplicate subject") {
    write_file(dir / "c.json", R"({"subjects": [{"name": "A", "grade": 9, "chapters": ["x"]},
                                                 {"name": "A", "grade": 9, "chapters": ["y"]}]})");
    CHECK_THROWS_AS(load_curriculum(dir / "c.json"), ValidationError);
  }
  SUBCASE("empty chapter list") {
    write_file(dir / "c.json", R"({"subjects": [{"name": "A", "grade": 9, "chapters": []}]})");
    CHECK_THROWS_AS(load_curriculum(dir / "c.json"), ValidationError);
  }
  SUBCASE("non-positive grade") {
    write_file(dir / "c.json", R"({"subjects": [{"name": "A", "grade": 0, "chapters": ["x"]}]})");
    CHECK_THROWS_AS(load_curriculum(dir / "c.json"), ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_curriculum(dir / "missing.json"), FileNotFound);
  }
  SUBCASE("syntax error reports its line") {
    write_file(dir / "c.json", "{\n  \"subjects\": [\n    {\"name\": \"A\",,}\n  ]\n}\n");
    try {
      load_curriculum(dir / "c.json");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
}

TEST_CASE("load, serialize, load is the identity") {
  TempDir dir;
  for (const char* name : {"grade9-math", "grade9-algebra"}) {
    Curriculum a = load_curriculum(testing::source_dir() / "curricula" / (std::string(name) + ".json"));
    write_file(dir / "copy.json", serialize_curriculum(a));
    CHECK(load_curriculum(dir / "copy.json") == a);
  }
}

TEST_CASE("locate_curriculum finds names and paths") {
  auto data = testing::source_dir();
  CHECK(locate_curriculum("grade9-math", data) == data / "curricula" / "grade9-math.json");
  auto direct = data / "curricula" / "grade9-algebra.json";
  CHECK(locate_curriculum(direct.string(), data) == direct);
  CHECK_THROWS_AS(locate_curriculum("grade12-physics", data), NotFound);
}
