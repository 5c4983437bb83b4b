// Drives the command-line tool as a subprocess.
#include "doctest.h"

#include "craniotk/io.hpp"
#include "craniotk/metrics.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#ifndef CRANIOTK_CLI_PATH
#error "CRANIOTK_CLI_PATH must name the command-line executable"
#endif

using namespace craniotk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("craniotk_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + CRANIOTK_CLI_PATH + "\" " + args + " 2>\"" + log.string() + "\" >/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto other = b / e.path().filename();
        if (!fs::exists(other) || read_file_bytes(e.path()) != read_file_bytes(other)) return false;
        ++n;
    }
    return n == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{}));
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("phantom determinism and manifest") {
    const auto dir = scratch("phantom");
    REQUIRE(run("phantom --n 5 --seed 7 --spacing 3 --out-dir " + (dir / "a").string(), dir / "a.log") == 0);
    REQUIRE(run("phantom --n 5 --seed 7 --spacing 3 --out-dir " + (dir / "b").string() + " --threads 3", dir / "b.log") == 0);
    CHECK(same_tree(dir / "a", dir / "b"));
    const auto m = read_manifest(dir / "a" / "manifest.json");
    REQUIRE(m.cases.size() == 5);
    for (const auto& c : m.cases) CHECK(c.subset == "train");
    CHECK_NOTHROW(validate_manifest(m, dir / "a"));
    const auto log = read_text_file(dir / "a.log");
    CHECK(log.find("\"event\":\"start\"") != std::string::npos);
    CHECK(log.find("\"margin\"") != std::string::npos);
}

TEST_CASE("usage errors exit with 2") {
    const auto dir = scratch("usage");
    CHECK(run("phantom --n 0 --out-dir " + dir.string(), dir / "l1") == 2);
    CHECK(run("phantom --out-dir " + dir.string(), dir / "l2") == 2);
    CHECK(run("frobnicate", dir / "l3") == 2);
    CHECK(run("reconstruct --method atlas-sub --defected x.nii --out y.nii", dir / "l4") == 2);
    CHECK(run("reconstruct --method sideways --defected x.nii --out y.nii", dir / "l5") == 2);
    CHECK(read_text_file(dir / "l4").find("\"event\":\"error\"") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1") {
    const auto dir = scratch("runtime");
    CHECK(run("craniectomy --manifest " + (dir / "missing.json").string() + " --out-dir " + dir.string(), dir / "l") == 1);
}

TEST_CASE("craniectomy conservation, template choice and determinism") {
    const auto dir = scratch("crani");
    REQUIRE(run("phantom --n 4 --seed 3 --spacing 3 --out-dir " + (dir / "p").string(), dir / "p.log") == 0);
    const std::string base = "craniectomy --manifest " + (dir / "p" / "manifest.json").string() + " --seed 11 --template sphere --out-dir ";
    REQUIRE(run(base + (dir / "c1").string(), dir / "c1.log") == 0);
    REQUIRE(run(base + (dir / "c2").string() + " --threads 4", dir / "c2.log") == 0);
    CHECK(same_tree(dir / "c1", dir / "c2"));
    const auto m = read_manifest(dir / "c1" / "manifest.json");
    REQUIRE(m.cases.size() == 4);
    for (const auto& c : m.cases) {
        REQUIRE(c.craniectomy.has_value());
        CHECK(c.craniectomy->kind == TemplateKind::Sphere);
        const auto full = read_volume(resolve_path(dir / "c1", *c.path("full")));
        const auto defected = read_volume(resolve_path(dir / "c1", *c.path("defected")));
        const auto defect = read_volume(resolve_path(dir / "c1", *c.path("defect")));
        CHECK(set_ops(full, set_ops(defected, defect, SetOp::Union), SetOp::Xor).empty());
        CHECK(set_ops(defected, defect, SetOp::Intersect).empty());
    }
}

TEST_CASE("evaluate ground truth against itself") {
    const auto dir = scratch("eval");
    REQUIRE(run("phantom --n 3 --seed 1 --spacing 3 --out-dir " + (dir / "p").string(), dir / "p.log") == 0);
    REQUIRE(run("craniectomy --manifest " + (dir / "p" / "manifest.json").string() + " --seed 2 --out-dir " +
                    (dir / "c").string(),
                dir / "c.log") == 0);
    const auto gt = (dir / "c" / "manifest.json").string();
    REQUIRE(run("evaluate --pred-manifest " + gt + " --gt-manifest " + gt + " --out-report " + (dir / "r.json").string(),
                dir / "e.log") == 0);
    const auto rep = report_from_json(read_text_file(dir / "r.json"));
    REQUIRE(rep.rows.size() == 3);
    for (const auto& r : rep.rows) {
        CHECK(r.dice == 1.0);
        REQUIRE(r.hd_mm.has_value());
        CHECK(*r.hd_mm == 0.0);
    }
    CHECK(fs::exists(dir / "r.csv"));
}

TEST_CASE("config file values apply below flags") {
    const auto dir = scratch("config");
    write_text_file(dir / "run.ini", "[phantom]\nn = 2\nspacing = 4\n");
    REQUIRE(run("--config " + (dir / "run.ini").string() + " phantom --out-dir " + (dir / "a").string(), dir / "a.log") == 0);
    CHECK(read_manifest(dir / "a" / "manifest.json").cases.size() == 2);
    REQUIRE(run("--config " + (dir / "run.ini").string() + " phantom --n 3 --out-dir " + (dir / "b").string(), dir / "b.log") == 0);
    CHECK(read_manifest(dir / "b" / "manifest.json").cases.size() == 3);
}

} // TEST_SUITE
