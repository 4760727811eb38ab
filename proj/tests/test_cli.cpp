#include <doctest.h>

#include "wsub/cli.hpp"
#include "wsub/io.hpp"
#include "wsub/measures.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace wsub;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("wsub_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct Files {
    fs::path dir, a, b, s1, s2, bad;
};

Files make_files() {
    Files f;
    f.dir = scratch("files");
    const Axis axis = Axis::span(-5.0, 5.0, 256);
    f.a = f.dir / "a.csv";
    f.b = f.dir / "b.csv";
    save(f.a.string(), gaussian(axis, -0.3, 0.04));
    save(f.b.string(), gaussian(axis, 0.3, 0.04));
    auto bump = [&](double c, double w) {
        return tilt_to_sphere(GridMeasure1D::from_density(axis, [=](double x) {
                                  return w * std::exp(-(x - c) * (x - c)) + (1 - w) * std::exp(-(x + c) * (x + c) / 0.5);
                              }),
                              0.0, 1.0);
    };
    f.s1 = f.dir / "s1.csv";
    f.s2 = f.dir / "s2.csv";
    save(f.s1.string(), bump(0.8, 0.6));
    save(f.s2.string(), bump(-0.9, 0.3));
    f.bad = f.dir / "bad.csv";
    std::ofstream(f.bad) << "x,mass\n0.5,0.5\n1.5,oops\n";
    return f;
}

const Files& files() {
    static const Files f = make_files();
    return f;
}

}  // namespace

TEST_CASE("dist") {
    const auto& f = files();
    const auto r = run({"dist", "--kind", "w2", "--a", f.a.string(), "--b", f.b.string()});
    CHECK(r.code == kPass);
    CHECK(std::stod(r.out) == doctest::Approx(w2_1d(load_grid(f.a.string()), load_grid(f.b.string()))).epsilon(1e-15));
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);

    const auto same = run({"dist", "--kind", "sphere", "--d", "1", "--a", f.s1.string(), "--b", f.s1.string()});
    CHECK(same.code == kPass);
    CHECK(std::stod(same.out) == 0.0);

    const auto bad = run({"dist", "--a", f.bad.string(), "--b", f.a.string()});
    CHECK(bad.code == kUsageError);
    CHECK(bad.err.find("line 3") != std::string::npos);

    CHECK(run({"dist", "--a", f.a.string()}).code == kUsageError);
    CHECK(run({"dist", "--a", f.a.string(), "--b", f.b.string(), "--tol", "0"}).code == kUsageError);
    CHECK(run({"bogus"}).code == kUsageError);
}

TEST_CASE("flow") {
    const auto out = scratch("flow");
    const auto r = run({"flow", "--kind", "ou", "--init-mean", "0", "--init-var", "1", "--t-end", "1", "--steps", "200",
                        "--check", "invariance", "--out", out.string()});
    CHECK(r.code == kPass);
    const auto reports = json::parse(r.out);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0]["name"] == "invariance");
    CHECK(reports[0]["lhs"].get<double>() <= 1e-12);
    CHECK(fs::exists(out / "trace.csv"));
    CHECK(fs::exists(out / "reports.json"));
    CHECK(fs::exists(out / "resolved_config.json"));
    CHECK(slurp(out / "trace.csv").rfind("t,entropy,rel_entropy,fisher,mean,m2,speed\n", 0) == 0);

    CHECK(run({"flow", "--kind", "bogus"}).code == kUsageError);
    CHECK(run({"flow", "--check", "nonsense"}).code == kUsageError);

    const auto d = run({"flow", "--kind", "dyson", "--particles", "8", "--t-end", "1", "--steps", "50", "--check", "energy"});
    CHECK(d.code == kPass);
}

TEST_CASE("geodesic") {
    const auto& f = files();
    const auto out = scratch("geo");
    const auto r = run({"geodesic", "--a", f.a.string(), "--b", f.b.string(), "--T", "32", "--out", out.string()});
    CHECK(r.code == kPass);
    const auto meta = json::parse(r.out);
    CHECK(std::abs(std::sqrt(2.0 * meta["action"].get<double>()) - 0.6) / 0.6 <= 0.02);
    CHECK(fs::exists(out / "path" / "meta.json"));
    CHECK(fs::exists(out / "certificate.json"));

    const auto same = run({"geodesic", "--a", f.a.string(), "--b", f.a.string(), "--T", "8"});
    CHECK(same.code == kPass);
    CHECK(json::parse(same.out)["action"].get<double>() <= 1e-10);

    CHECK(run({"geodesic", "--a", f.a.string(), "--b", f.b.string(), "--constraints", "sphere", "--T", "8"}).code ==
          kInfeasible);
    CHECK(run({"geodesic", "--a", f.s1.string(), "--b", f.s2.string(), "--constraints", "sphere", "--T", "16",
               "--max-iters", "20"})
              .code == kNotConverged);
}

TEST_CASE("check") {
    const auto r = run({"check", "talagrand", "--quick"});
    CHECK(r.code == kPass);
    const auto reports = json::parse(r.out);
    CHECK(reports.size() == 3);
    for (const auto& x : reports) CHECK(x["metadata"]["profile"] == "quick");

    const auto s = run({"check", "--suite", "envelope", "--quick"});
    CHECK(s.code == kPass);
    CHECK(json::parse(s.out)[0]["name"] == "envelope_k64");

    const auto injected = run({"check", "evi", "--quick", "--lambda-scale", "2"});
    CHECK(injected.code == kVerificationFailure);

    CHECK(run({"check", "nonexistent"}).code == kUsageError);

    const auto out = scratch("check_all");
    const auto all = run({"check", "all", "--quick", "--out", out.string()});
    CHECK(all.code == kPass);
    CHECK(json::parse(all.out).size() >= 20);
    CHECK(fs::exists(out / "reports.csv"));
}

TEST_CASE("ldp") {
    const auto a = run({"ldp", "--n", "40", "--r", "0.2", "--replicates", "2000", "--seed", "5"});
    const auto b = run({"ldp", "--n", "40", "--r", "0.2", "--replicates", "2000", "--seed", "5"});
    CHECK(a.code == kPass);
    CHECK(a.out == b.out);

    const auto zero = run({"ldp", "--n", "40", "--r", "0", "--replicates", "100"});
    CHECK(zero.code == kPass);
    const auto z = json::parse(zero.out);
    CHECK(z["p_hat"].get<double>() == 1.0);
    CHECK(z["bound"].get<double>() == 1.0);

    const auto probe = run({"ldp", "--kind", "gue-probe", "--n", "16", "--r", "0.01", "0.3", "--replicates", "50"});
    CHECK(probe.code == kPass);
    std::istringstream lines(probe.out);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        CHECK(json::parse(line)["status"] == "report-only");
        ++count;
    }
    CHECK(count == 2);
}

TEST_CASE("resolved config reproduces outputs") {
    const auto first = scratch("cfg1"), second = scratch("cfg2");
    REQUIRE(run({"ldp", "--n", "30", "60", "--r", "0.15", "--replicates", "1500", "--seed", "9", "--out", first.string()})
                .code == kPass);
    const auto cfg = first / "resolved_config.json";
    CHECK(json::parse(slurp(cfg))["command"] == "ldp");
    REQUIRE(run({"--config", cfg.string(), "--out", second.string()}).code == kPass);
    CHECK(slurp(first / "tails.jsonl") == slurp(second / "tails.jsonl"));
    CHECK(slurp(first / "tails.csv") == slurp(second / "tails.csv"));

    // flags override file values
    const auto over = scratch("cfg3");
    REQUIRE(run({"ldp", "--config", cfg.string(), "--seed", "10", "--out", over.string()}).code == kPass);
    CHECK(slurp(first / "tails.jsonl") != slurp(over / "tails.jsonl"));
    CHECK(json::parse(slurp(over / "resolved_config.json"))["options"]["seed"] == 10);

    const auto& f = files();
    const auto d1 = scratch("cfg4"), d2 = scratch("cfg5");
    REQUIRE(run({"dist", "--kind", "w1", "--a", f.a.string(), "--b", f.b.string(), "--out", d1.string()}).code == kPass);
    REQUIRE(run({"--config", (d1 / "resolved_config.json").string(), "--out", d2.string()}).code == kPass);
    CHECK(slurp(d1 / "dist.json") == slurp(d2 / "dist.json"));

    std::ofstream(first / "broken.json") << "{ not json";
    CHECK(run({"--config", (first / "broken.json").string()}).code == kUsageError);
}

TEST_CASE("installed binary maps exit codes") {
    const auto& f = files();
    const std::string exe = WSUB_EXE;
    auto status = [](const std::string& cmd) { return WEXITSTATUS(std::system((cmd + " >/dev/null 2>&1").c_str())); };
    CHECK(status(exe + " dist --a " + f.a.string() + " --b " + f.b.string()) == 0);
    CHECK(status(exe + " dist --a " + f.bad.string() + " --b " + f.b.string()) == 2);
    CHECK(status(exe + " flow --kind nope") == 2);
    CHECK(status(exe + " --help") == 0);
}
