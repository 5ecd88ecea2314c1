#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace {

const char* binary() { return std::getenv("MSSDE_BIN"); }

int run(const std::string& args, std::string* output = nullptr) {
    std::string cmd = std::string(binary()) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string text;
    std::array<char, 4096> buf;
    while (std::size_t got = fread(buf.data(), 1, buf.size(), pipe)) text.append(buf.data(), got);
    int status = pclose(pipe);
    if (output) *output = text;
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("help exits cleanly and lists all subcommands") {
    REQUIRE_MESSAGE(binary() != nullptr, "MSSDE_BIN must point at the CLI binary");
    std::string out;
    CHECK(run("--help", &out) == 0);
    for (const char* sub : {"validate", "poisson", "average", "simulate", "converge"})
        CHECK(out.find(sub) != std::string::npos);
    CHECK(run("converge --help", &out) == 0);
    for (const char* flag : {"--model", "--kind", "--eps", "--paths", "--seed",
                             "--allow-uncoupled-check", "--no-timing", "--out"})
        CHECK(out.find(flag) != std::string::npos);
}

TEST_CASE("unknown flags exit with code 1") {
    CHECK(run("converge --definitely-not-a-flag 3") == 1);
    CHECK(run("frobnicate") == 1);
}

TEST_CASE("poisson subcommand prints the centered solution") {
    std::string out;
    CHECK(run("poisson --model example_2_9 --x 0", &out) == 0);
    CHECK(out.find("0.5") != std::string::npos);
    CHECK(out.find("-0.5") != std::string::npos);
    CHECK(out.find("residual") != std::string::npos);
}

TEST_CASE("hypothesis guard maps to exit code 2 and cites the condition") {
    std::string out;
    int code = run("converge --model remark_5_4 --kind strong_fixed_t --eps 0.05 "
                   "--paths 200 --out /tmp/mssde_cli_guard",
                   &out);
    CHECK(code == 2);
    CHECK(out.find("sigma(x, i) = sigma(x)") != std::string::npos);
}

TEST_CASE("validate subcommand reports probe status") {
    std::string out;
    CHECK(run("validate --model example_2_9", &out) == 0);
    CHECK(out.find("VALID") != std::string::npos);
}

TEST_CASE("dyadic eps ranges expand to one estimate per exponent") {
    std::string out;
    int code = run("converge --model example_2_9 --kind strong_fixed_t --eps 2^-4..2^-6 "
                   "--paths 500 --step 2^-5 --seed 2 --no-timing "
                   "--out /tmp/mssde_cli_range",
                   &out);
    CHECK(code == 0);
    CHECK(out.find("eps=0.0625") != std::string::npos);
    CHECK(out.find("eps=0.03125") != std::string::npos);
    CHECK(out.find("eps=0.015625") != std::string::npos);
    CHECK(out.find("fitted order") != std::string::npos);
    std::remove("/tmp/mssde_cli_range.json");
    std::remove("/tmp/mssde_cli_range.csv");
}

TEST_CASE("simulate dumps a binary path with the documented layout") {
    std::string out;
    int code = run("simulate --model example_2_9 --eps 0.1 --T 1 --step 0.25 --seed 9 "
                   "--dump /tmp/mssde_cli_dump.bin",
                   &out);
    CHECK(code == 0);
    FILE* f = std::fopen("/tmp/mssde_cli_dump.bin", "rb");
    REQUIRE(f != nullptr);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    std::fclose(f);
    // header: 4 u64 + 2 f64 + u64 = 56 bytes; 5 grid rows of (t, x, alpha).
    CHECK(size == 56 + 5 * 3 * 8);
    std::remove("/tmp/mssde_cli_dump.bin");
}

TEST_CASE("converge writes report files") {
    std::string out;
    int code = run("converge --model example_2_9 --kind strong_fixed_t --eps 0.1 "
                   "--paths 500 --step 2^-5 --seed 5 --no-timing "
                   "--out /tmp/mssde_cli_rep",
                   &out);
    CHECK(code == 0);
    FILE* f = std::fopen("/tmp/mssde_cli_rep.json", "r");
    REQUIRE(f != nullptr);
    std::fclose(f);
    std::remove("/tmp/mssde_cli_rep.json");
    std::remove("/tmp/mssde_cli_rep.csv");
}
