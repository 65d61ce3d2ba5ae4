#include <hcw/io.hpp>

#include <doctest.h>

using namespace hcw;
using namespace hcw::io;

TEST_CASE("csv tables")
{
    const auto t = parse_csv("# comment\na, b ,c\n\n1,2,3\n 4 ,5,6\n", "t.csv");
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].line == 4);
    CHECK(t.rows[1].cells[0] == "4");
    CHECK(t.column("c") == 2);
    CHECK_THROWS_AS(t.column("d"), ConfigError);

    try
    {
        parse_csv("a,b\n1,2\n3\n", "w.csv");
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("w.csv:3") == 0);
    }
    CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), ConfigError);
}

TEST_CASE("numbers")
{
    CHECK(parse_number("0.97%", "s", 1) == doctest::Approx(0.0097));
    CHECK(parse_number(" -18.4 ", "s", 1) == -18.4);
    CHECK(parse_number("1e-6", "s", 1) == 1e-6);
    CHECK_THROWS_AS(parse_number("abc", "s", 7), ConfigError);
    CHECK_THROWS_AS(parse_number("", "s", 7), ConfigError);
    CHECK_THROWS_AS(parse_number("1.2x", "s", 7), ConfigError);
}

TEST_CASE("durations")
{
    CHECK(parse_duration("300") == 300.0);
    CHECK(parse_duration("300s") == 300.0);
    CHECK(parse_duration("30min") == 1800.0);
    CHECK(parse_duration("8h") == 28800.0);
    CHECK(parse_duration("5093.9h") == doctest::Approx(5093.9 * 3600.0));
    CHECK(parse_duration("2d") == 172800.0);
    CHECK_THROWS_AS(parse_duration("2 weeks"), ConfigError);
    CHECK_THROWS_AS(parse_duration("h"), ConfigError);
}

TEST_CASE("documents")
{
    const auto doc = Document::parse("a: 1\nb: hello\nc: 2h\nd:\n  e: x\n", "doc.yaml");
    CHECK(doc.number(doc.root(), "a") == 1.0);
    CHECK(doc.integer(doc.root(), "a") == 1);
    CHECK(doc.string(doc.root(), "b") == "hello");
    CHECK(doc.duration(doc.root(), "c") == 7200.0);
    CHECK(doc.number_or(doc.root(), "zz", 4.5) == 4.5);
    CHECK_FALSE(doc.optional_string(doc.root(), "zz").has_value());
    CHECK(doc.boolean_or(doc.root(), "zz", true));

    try
    {
        doc.number(doc.root(), "b");
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 2);
    }
    try
    {
        doc.required(doc.root()["d"], "missing");
        FAIL("expected ConfigError");
    }
    catch (const ConfigError& e)
    {
        CHECK(e.line() == 5);
    }
    CHECK_THROWS_AS(Document::parse("a: [1, 2\n", "broken.yaml"), ConfigError);
    CHECK_THROWS_AS(Document::load("/nonexistent/x.yaml"), ConfigError);
}
