#include "doctest.h"
#include "nlpd/cli.hpp"
#include "nlpd/errors.hpp"
#include "nlpd/spectral.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nlpd;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

const std::string kOU = R"({"kind":"ou","theta":1,"mu":0,"sigma":1})";

}  // namespace

TEST_CASE("number formatting and grids") {
  CHECK(cli::format_number(0.1) == "0.10000000000000001");
  CHECK(cli::format_number(1.0) == "1");
  CHECK(cli::format_number(-1.0 / 3.0) == "-0.33333333333333331");
  CHECK(cli::format_number(-2.5e-300) == "-2.5e-300");
  const auto g = cli::parse_grid("-3:3:121");
  REQUIRE(g.size() == 121);
  CHECK(g.front() == -3.0);
  CHECK(g.back() == 3.0);
  CHECK(g[60] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cli::parse_grid(2.5) == std::vector<double>{2.5});
  CHECK(cli::parse_grid(nlohmann::json::array({1, 2})) == std::vector<double>{1, 2});
  CHECK_THROWS(cli::parse_grid("1:2"));
  CHECK_THROWS(cli::parse_grid("1:2:x"));
}

TEST_CASE("density subcommand") {
  const auto r = run({"density", "--family", kOU, "--phi", R"({"kind":"stable","alpha":0.5})", "--t", "1", "--x0", "0",
                      "--x-grid", "-3:3:121"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find('\r') == std::string::npos);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 122);
  CHECK(ls[0] == "t,x,x0,value,abs_err_bound");
  const SpectralExpansion se(PearsonFamily::ou(1, 0, 1), Bernstein::stable(0.5));
  const auto p = se.nonlocal_transition_density(1.0, 0.0, 0.0);
  CHECK(ls[61] == "1,0,0," + cli::format_number(p.value) + "," + cli::format_number(p.error_bound));

  // --phi none selects the classical kernel: 1/sqrt(2 pi (1 - e^{-2})) at x = x0 = 0.
  const auto c = run({"density", "--family", kOU, "--phi", "none", "--t", "1", "--x0", "0", "--x-grid", "0"});
  REQUIRE(c.code == 0);
  const auto row = lines(c.out).at(1);
  const double v = std::stod(row.substr(6, row.find(',', 6) - 6));
  CHECK(v == doctest::Approx(0.429029).epsilon(1e-6));
}

TEST_CASE("classify, relax and phi-eval") {
  CHECK(run({"classify", "--phi", R"({"kind":"gamma"})"}).out == "short-range\n");
  CHECK(run({"classify", "--phi", R"({"kind":"stable","alpha":0.5})"}).out == "long-range\n");
  CHECK(run({"classify", "--phi", R"({"kind":"geometric_stable","alpha":0.5})"}).out == "long-range\n");
  CHECK(run({"classify", "--phi", R"({"kind":"tempered_stable","alpha":0.5,"theta":1})"}).out == "short-range\n");
  const auto r = run({"relax", "--t", "1", "--lambda", "1"});
  REQUIRE(r.code == 0);
  const auto row = lines(r.out).at(1);
  CHECK(row.substr(0, 4) == "1,1,");
  CHECK(std::stod(row.substr(4)) == doctest::Approx(std::exp(1.0) * std::erfc(1.0)).epsilon(1e-9));
  const auto p = run({"phi-eval", "--phi", R"({"kind":"stable","alpha":0.5})", "--lambda", "[4]"});
  CHECK(lines(p.out).at(1) == "4,2");
}

TEST_CASE("solve reproduces the datum at t = 0") {
  const auto r = run({"solve", "--mode", "backward", "--datum", "Q2", "--t", "0", "--x-grid", "[-1,0,2]"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 4);
  CHECK(ls[0] == "t,x,value");
  auto value = [&](int i) { return std::stod(ls[i].substr(ls[i].rfind(',') + 1)); };
  CHECK(value(1) == doctest::Approx(0.0).scale(1.0));
  CHECK(value(2) == doctest::Approx(-1.0 / std::sqrt(2.0)));
  CHECK(value(3) == doctest::Approx(3.0 / std::sqrt(2.0)));
}

TEST_CASE("exit codes") {
  CHECK(run({"density", "--family", R"({"kind":"ou","theta":1,"mu":0,"sigma":1,"x":1})", "--t", "1", "--x0", "0"}).code == 2);
  CHECK(run({"density", "--family", "{not json", "--t", "1", "--x0", "0"}).code == 2);
  CHECK(run({"density", "--t", "1"}).code == 2);  // missing x0
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"solve", "--datum", R"({"kind":"dirac"})", "--t", "1"}).code == 2);
  CHECK(run({"density", "--family", R"({"kind":"cir","theta":1,"a":1,"b":1})", "--t", "1", "--x0", "-1"}).code == 4);
  CHECK(run({"solve", "--family", R"({"kind":"fs","theta":1,"alpha":4,"beta":17})", "--datum", "Q9", "--t", "1"}).code ==
        4);
  // A jump cannot be resolved by 60 Hermite terms at the default tail tolerance.
  CHECK(run({"solve", "--datum", R"({"kind":"tabulated","x":[-6,-0.001,0.001,6],"y":[0,0,1,1]})", "--t", "1"}).code ==
        3);
  CHECK(run({"simulate", "--family", R"({"kind":"cir","theta":1,"a":1,"b":1})", "--x0", "1", "--t", "1", "--dt", "0.5",
             "--paths", "10"})
            .code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("configuration round trip and unknown keys") {
  const auto dumped = run({"simulate", "--t", "0.5:1:2", "--x0", "0.25", "--paths", "100", "--seed", "9", "--x-range",
                           "-2:2", "--stationary", "--dump-config"});
  REQUIRE(dumped.code == 0);
  const auto j = nlohmann::json::parse(dumped.out);
  CHECK(j.at("command") == "simulate");
  const auto job = cli::Job::from_json(j);
  CHECK(job.to_json() == j);
  CHECK(job.numeric.x_range == std::vector<double>{-2, 2});

  const auto path = std::filesystem::temp_directory_path() / "nlpd_cli_job.json";
  {
    std::ofstream(path) << dumped.out;
  }
  const auto again = run({"--config", path.string(), "--dump-config"});
  CHECK(again.out == dumped.out);

  auto bad = j;
  bad["numeric"]["extra"] = 1;
  CHECK_THROWS_AS(cli::Job::from_json(bad), ConfigError);
  bad = j;
  bad["grids"]["y"] = 1;
  CHECK_THROWS_AS(cli::Job::from_json(bad), ConfigError);
  bad = j;
  bad["colour"] = "red";
  CHECK_THROWS_AS(cli::Job::from_json(bad), ConfigError);
  std::filesystem::remove(path);
}

TEST_CASE("simulation output is deterministic and independent of the worker count") {
  const std::vector<std::string> base{"simulate", "--phi", R"({"kind":"stable","alpha":0.7})", "--t", "[0.5,1]", "--x0",
                                      "0", "--paths", "3000", "--seed", "17", "--x-range", "-4:4", "--bins", "16"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  const auto a = with({"--threads", "1"});
  const auto b = with({"--threads", "3"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(lines(a.out).size() == 33);
  CHECK(with({"--seed", "18"}).out != a.out);

  const auto file = std::filesystem::temp_directory_path() / "nlpd_cli_sim.csv";
  REQUIRE(with({"--output", file.string()}).code == 0);
  std::ifstream in(file, std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text == a.out);
  std::filesystem::remove(file);

  ::setenv("NLP_THREADS", "zero", 1);
  CHECK(with({}).code == 2);
  ::setenv("NLP_THREADS", "2", 1);
  CHECK(with({}).out == a.out);
  ::unsetenv("NLP_THREADS");
}

TEST_CASE("correlation subcommand reports theory alongside the estimate") {
  const auto r = run({"correlation", "--t", "1", "--s", "[0,0.5]", "--paths", "4000", "--seed", "3"});
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(ls.size() == 3);
  CHECK(ls[0] == "t,s,estimate,std_error,theory");
  auto last = [](const std::string& l) { return std::stod(l.substr(l.rfind(',') + 1)); };
  CHECK(last(ls[1]) == doctest::Approx(std::exp(1.0) * std::erfc(1.0)).epsilon(1e-9));
  CHECK(last(ls[2]) > last(ls[1]));
}
