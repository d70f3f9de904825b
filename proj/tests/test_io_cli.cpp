#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "pqscan/io.hpp"
#include "testutil.hpp"

using namespace pqscan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("pqscan_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args, std::string* out = nullptr) {
    TempDir dummy;
    std::string capture = dummy.file("out.txt");
    std::string cmd = std::string(PQSCAN_CLI_PATH) + " " + args + " >" + capture + " 2>&1";
    int rc = std::system(cmd.c_str());
    if (out) {
        std::ifstream is(capture);
        std::stringstream ss;
        ss << is.rdbuf();
        *out = ss.str();
    }
    return WEXITSTATUS(rc);
}

} // namespace

TEST_CASE("fvecs/ivecs round trip and validation") {
    TempDir dir;
    SECTION("round trip") {
        std::vector<std::vector<float>> rows = {{1.5f, -2.0f, 3.25f}, {0.0f, 7.0f, -1.0f}};
        io::save_fvecs(dir.file("a.fvecs"), rows);
        auto v = io::load_fvecs(dir.file("a.fvecs"));
        CHECK(v.dim == 3);
        CHECK(v.count == 2);
        CHECK(v.data == std::vector<float>{1.5f, -2.0f, 3.25f, 0.0f, 7.0f, -1.0f});

        std::vector<std::vector<uint32_t>> ids = {{1, 2, 3}, {4, 5, 6}};
        io::save_ivecs(dir.file("a.ivecs"), ids);
        auto iv = io::load_ivecs(dir.file("a.ivecs"));
        CHECK(iv.count == 2);
        CHECK(iv.data == std::vector<int32_t>{1, 2, 3, 4, 5, 6});
    }
    SECTION("truncated file is an io error") {
        std::vector<std::vector<float>> rows = {{1.0f, 2.0f}};
        io::save_fvecs(dir.file("t.fvecs"), rows);
        fs::resize_file(dir.file("t.fvecs"), 9); // 12 bytes written
        CHECK_THROWS_AS(io::load_fvecs(dir.file("t.fvecs")), io_error);
    }
    SECTION("inconsistent dimension headers are an io error") {
        std::ofstream os(dir.file("bad.fvecs"), std::ios::binary);
        int32_t d1 = 2, d2 = 1;
        float v = 0;
        os.write(reinterpret_cast<char*>(&d1), 4);
        os.write(reinterpret_cast<char*>(&v), 4);
        os.write(reinterpret_cast<char*>(&v), 4);
        os.write(reinterpret_cast<char*>(&d2), 4);
        os.write(reinterpret_cast<char*>(&v), 4);
        os.write(reinterpret_cast<char*>(&v), 4);
        os.close();
        CHECK_THROWS_AS(io::load_fvecs(dir.file("bad.fvecs")), io_error);
    }
    SECTION("missing file") { CHECK_THROWS_AS(io::load_fvecs(dir.file("nope.fvecs")), io_error); }
}

TEST_CASE("codebook container round trip") {
    TempDir dir;
    auto spec = allocate_dims(24, parse_spec_string("6x{4,4}"));
    auto pts = testutil::clustered_data(300, 24, 8, 7);
    Codebook cb = train_codebook(pts, 300, spec, {.seed = 3});
    io::save_codebook(dir.file("cb.qadc"), cb);
    Codebook back = io::load_codebook(dir.file("cb.qadc"));
    CHECK(back == cb);

    // magic is the contract
    std::ifstream is(dir.file("cb.qadc"), std::ios::binary);
    char magic[4];
    is.read(magic, 4);
    CHECK(std::string(magic, 4) == "QADC");
}

TEST_CASE("packed section refuses codes built for another spec") {
    std::mt19937_64 rng(9);
    auto spec_a = allocate_dims(32, parse_spec_string("8x{4,4}"));
    auto spec_b = allocate_dims(32, parse_spec_string("4x{4,4}"));
    auto scheme_a = PackingScheme::for_spec(spec_a);
    std::vector<Code> codes(10);
    for (auto& c : codes) c = testutil::random_code(spec_a, rng);
    std::vector<PackedList> lists = {pack_list(codes, scheme_a)};
    std::stringstream ss;
    io::write_packed_section(ss, spec_a, scheme_a, lists);
    CHECK_THROWS_AS(io::read_packed_section(ss, spec_b, PackingScheme::for_spec(spec_b)), corruption_error);
}

TEST_CASE("cli end to end: train, build, search, eval") {
    TempDir dir;
    const size_t d = 16, n = 2000, nq = 30;
    auto base = testutil::clustered_data(n, d, 25, 201);
    auto queries = testutil::clustered_data(nq, d, 25, 202);
    {
        std::vector<std::vector<float>> rows(n), qrows(nq);
        for (size_t i = 0; i < n; ++i) rows[i].assign(base.begin() + i * d, base.begin() + (i + 1) * d);
        for (size_t i = 0; i < nq; ++i) qrows[i].assign(queries.begin() + i * d, queries.begin() + (i + 1) * d);
        io::save_fvecs(dir.file("base.fvecs"), rows);
        io::save_fvecs(dir.file("q.fvecs"), qrows);
    }
    std::vector<std::vector<uint32_t>> gt(nq);
    for (size_t q = 0; q < nq; ++q) gt[q] = testutil::brute_force_nn(base, n, queries.data() + q * d, d, 100);
    io::save_ivecs(dir.file("gt.ivecs"), gt);

    std::string out;
    SECTION("train is byte-for-byte reproducible for a fixed seed") {
        auto read_all = [](const std::string& p) {
            std::ifstream is(p, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            return ss.str();
        };
        REQUIRE(run_cli("train --data " + dir.file("base.fvecs") + " --spec 4x{4,4} --seed 9 --out " +
                            dir.file("cb1.qadc"),
                        &out) == 0);
        REQUIRE(run_cli("train --data " + dir.file("base.fvecs") + " --spec 4x{4,4} --seed 9 --out " +
                            dir.file("cb2.qadc"),
                        &out) == 0);
        CHECK(read_all(dir.file("cb1.qadc")) == read_all(dir.file("cb2.qadc")));
    }
    SECTION("flat pipeline") {
        CHECK(run_cli("train --data " + dir.file("base.fvecs") + " --spec 4x{4,4} --seed 5 --out " +
                          dir.file("cb.qadc"),
                      &out) == 0);
        CHECK(run_cli("build --data " + dir.file("base.fvecs") + " --flat --codebook " + dir.file("cb.qadc") +
                          " --out " + dir.file("flat.idx"),
                      &out) == 0);
        CHECK(run_cli("search --index " + dir.file("flat.idx") + " --queries " + dir.file("q.fvecs") +
                          " -k 100 --out-ids " + dir.file("res.ivecs") + " --out-dists " + dir.file("res.fvecs") +
                          " --latency-csv " + dir.file("lat.csv") + " --threads 2",
                      &out) == 0);
        REQUIRE(run_cli("eval --results " + dir.file("res.ivecs") + " --gt " + dir.file("gt.ivecs") +
                            " --latency " + dir.file("lat.csv"),
                        &out) == 0);
        INFO(out);
        CHECK(out.find("R@1 ") != std::string::npos);
        CHECK(out.find("R@100 ") != std::string::npos);
        CHECK(out.find("mean query time") != std::string::npos);

        // latency CSV schema
        std::ifstream lat(dir.file("lat.csv"));
        std::string header;
        std::getline(lat, header);
        CHECK(header == "query_id,probes,time_us,results_found");

        // identical results evaluate to R@1 1.000
        REQUIRE(run_cli("eval --results " + dir.file("gt.ivecs") + " --gt " + dir.file("gt.ivecs"), &out) == 0);
        CHECK(out.find("R@1 1.000") != std::string::npos);
    }
    SECTION("ivf pipeline with bench") {
        CHECK(run_cli("build --data " + dir.file("base.fvecs") + " --spec 4x{4,4} -K 16 --seed 5 --out " +
                          dir.file("ivf.idx"),
                      &out) == 0);
        CHECK(run_cli("search --index " + dir.file("ivf.idx") + " --queries " + dir.file("q.fvecs") +
                          " -k 100 --probes 8 --out-ids " + dir.file("res.ivecs"),
                      &out) == 0);
        REQUIRE(run_cli("bench --index " + dir.file("ivf.idx") + " --queries " + dir.file("q.fvecs") + " --gt " +
                            dir.file("gt.ivecs") + " --probes 1,2,4 --out " + dir.file("bench.csv"),
                        &out) == 0);
        std::ifstream bench(dir.file("bench.csv"));
        std::string line;
        std::getline(bench, line);
        CHECK(line == "probes,r_at_1,r_at_100,mean_ms");
        int rows = 0;
        while (std::getline(bench, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 3);
    }
    SECTION("search honors forced kernels and reports results either way") {
        CHECK(run_cli("build --data " + dir.file("base.fvecs") + " --spec 4x{4,4} -K 8 --seed 5 --out " +
                          dir.file("ivf.idx"),
                      &out) == 0);
        for (const char* kernel : {"scalar-quantized", "scalar-float", "auto"}) {
            CHECK(run_cli("search --index " + dir.file("ivf.idx") + " --queries " + dir.file("q.fvecs") +
                              " -k 10 --probes 4 --kernel " + std::string(kernel) + " --out-ids " +
                              dir.file("res.ivecs"),
                          &out) == 0);
        }
    }
}

TEST_CASE("cli error paths use distinct exit codes") {
    TempDir dir;
    std::string out;
    // missing file -> 3
    CHECK(run_cli("train --data " + dir.file("missing.fvecs") + " --spec 4x{4,4} --out " + dir.file("x"), &out) ==
          3);
    // malformed spec -> 4, message lists supported families
    {
        std::vector<std::vector<float>> rows(40, std::vector<float>(16, 1.0f));
        io::save_fvecs(dir.file("tiny.fvecs"), rows);
        int rc = run_cli("train --data " + dir.file("tiny.fvecs") + " --spec 12x{5,4} --out " + dir.file("x"), &out);
        CHECK(rc == 4);
        CHECK(out.find("{6,6,4}") != std::string::npos);
    }
    // unsupported coarse index is rejected with a message -> 7
    {
        int rc = run_cli("build --data " + dir.file("tiny.fvecs") + " --spec 4x{4,4} --coarse imi --out " +
                             dir.file("x"),
                         &out);
        CHECK(rc == 7);
        CHECK(out.find("not supported") != std::string::npos);
    }
}

TEST_CASE("cli selftest and caps run clean") {
    std::string out;
    CHECK(run_cli("selftest --trials 200", &out) == 0);
    INFO(out);
    CHECK(out.find("diff {4,4}") != std::string::npos);
    CHECK(run_cli("caps", &out) == 0);
    CHECK(out.find("available:") != std::string::npos);
}

TEST_CASE("dump-tables writes the diagnostic CSV") {
    TempDir dir;
    const size_t d = 8, n = 300;
    auto base = testutil::clustered_data(n, d, 5, 301);
    std::vector<std::vector<float>> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i].assign(base.begin() + i * d, base.begin() + (i + 1) * d);
    io::save_fvecs(dir.file("base.fvecs"), rows);
    io::save_fvecs(dir.file("q.fvecs"), {rows[0]});
    std::string out;
    REQUIRE(run_cli("train --data " + dir.file("base.fvecs") + " --spec 2x{4,4} --out " + dir.file("cb.qadc"),
                    &out) == 0);
    REQUIRE(run_cli("build --data " + dir.file("base.fvecs") + " --flat --codebook " + dir.file("cb.qadc") +
                        " --out " + dir.file("f.idx"),
                    &out) == 0);
    REQUIRE(run_cli("search --index " + dir.file("f.idx") + " --queries " + dir.file("q.fvecs") +
                        " -k 5 --dump-tables " + dir.file("tables.csv"),
                    &out) == 0);
    std::ifstream csv(dir.file("tables.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header == "sub,index,float,quantized");
    int lines = 0;
    std::string line;
    while (std::getline(csv, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 32); // 2 subquantizers x 16 entries
}
