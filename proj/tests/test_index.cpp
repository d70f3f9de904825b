#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>
#include <sstream>

#include "pqscan/index.hpp"
#include "pqscan/io.hpp"
#include "pqscan/recall.hpp"
#include "testutil.hpp"

using namespace pqscan;

namespace {

Codebook small_codebook(size_t d, uint64_t seed, const char* spec_str = "8x{4,4}") {
    auto spec = allocate_dims(static_cast<uint32_t>(d), parse_spec_string(spec_str));
    auto pts = testutil::clustered_data(600, d, 20, seed);
    return train_codebook(pts, 600, spec, {.seed = seed});
}

} // namespace

TEST_CASE("flat search edge cases") {
    const size_t d = 32;
    Codebook cb = small_codebook(d, 3);
    SECTION("empty database returns empty results") {
        FlatIndex idx = FlatIndex::encode_database({}, 0, cb);
        SearchParams p;
        auto res = idx.search(std::vector<float>(d, 0.0f), p);
        CHECK(res.ids.empty());
    }
    SECTION("R >= database size returns every id, sorted by distance") {
        auto base = testutil::clustered_data(37, d, 5, 9);
        FlatIndex idx = FlatIndex::encode_database(base, 37, cb);
        SearchParams p;
        p.r = 100;
        p.t = 400;
        auto res = idx.search(std::vector<float>(d, 1.0f), p);
        REQUIRE(res.ids.size() == 37);
        std::set<uint32_t> seen(res.ids.begin(), res.ids.end());
        CHECK(seen.size() == 37);
        for (size_t i = 1; i < res.dists.size(); ++i) CHECK(res.dists[i] >= res.dists[i - 1]);
    }
    SECTION("dimension mismatch and bad params are input errors") {
        auto base = testutil::clustered_data(64, d, 5, 9);
        FlatIndex idx = FlatIndex::encode_database(base, 64, cb);
        SearchParams p;
        CHECK_THROWS_AS(idx.search(std::vector<float>(d + 1, 0.0f), p), input_error);
        SearchParams bad;
        bad.r = 10;
        bad.t = 5; // t < R
        CHECK_THROWS_AS(idx.search(std::vector<float>(d, 0.0f), bad), input_error);
    }
}

TEST_CASE("flat quantized search matches the per-code quantized oracle") {
    const size_t d = 32;
    const size_t n = 3000;
    Codebook cb = small_codebook(d, 5);
    auto base = testutil::clustered_data(n, d, 30, 11);
    FlatIndex idx = FlatIndex::encode_database(base, n, cb);
    std::vector<Code> codes(n);
    for (size_t i = 0; i < n; ++i) codes[i] = encode({base.data() + i * d, d}, cb);

    auto queries = testutil::clustered_data(10, d, 30, 12);
    SearchParams p;
    p.r = 50;
    p.t = 400;
    for (size_t q = 0; q < 10; ++q) {
        std::span<const float> qu{queries.data() + q * d, d};
        auto res = idx.search(qu, p);

        // oracle: same calibration, per-code saturating ADC, bounded heap
        auto dt = compute_tables(qu, cb);
        std::vector<float> prefix;
        collect_prefix_float(idx.list(), idx.scheme(), dt, p.t, prefix);
        auto [dmin, dmax] = calibrate_bounds(dt, prefix, p.r);
        auto qt = quantize_tables(dt, dmin, dmax, idx.scheme().word_width);
        CandidateHeap<uint32_t> want(p.r);
        for (size_t i = 0; i < n; ++i) want.push(adc_scalar_quantized(codes[i], qt), static_cast<uint32_t>(i));
        auto ws = want.sorted();
        REQUIRE(res.ids.size() == ws.size());
        for (size_t i = 0; i < ws.size(); ++i) {
            CHECK(res.ids[i] == ws[i].id);
            CHECK(res.dists[i] == unquantize(ws[i].dist, qt));
        }
    }
}

TEST_CASE("ivf build") {
    const size_t d = 16;
    SECTION("K=1 puts everything in one list; residuals subtract the global centroid") {
        auto base = testutil::clustered_data(300, d, 4, 21);
        IvfBuildConfig cfg;
        cfg.k_coarse = 1;
        cfg.train.seed = 2;
        IvfIndex idx = IvfIndex::build(base, 300, parse_spec_string("4x{4,4}"), cfg);
        CHECK(idx.cells() == 1);
        CHECK(idx.size() == 300);
        CHECK(idx.list_ids()[0].size() == 300);
        // K=1 k-means centroid is the global mean
        std::vector<double> mean(d, 0.0);
        for (size_t i = 0; i < 300; ++i)
            for (size_t j = 0; j < d; ++j) mean[j] += base[i * d + j];
        auto ctr = idx.coarse_centroid(0);
        for (size_t j = 0; j < d; ++j) CHECK(ctr[j] == Catch::Approx(mean[j] / 300).margin(1e-3));
    }
    SECTION("well-separated clusters land in their own lists") {
        // centers far apart; spread tiny, so the assignment oracle is the generator
        std::mt19937_64 rng(31);
        const size_t k = 4, per = 50;
        std::vector<float> base((k * per) * d);
        std::vector<uint32_t> truth(k * per);
        for (size_t i = 0; i < k * per; ++i) {
            size_t c = i % k;
            truth[i] = static_cast<uint32_t>(c);
            for (size_t j = 0; j < d; ++j)
                base[i * d + j] = static_cast<float>(c) * 1000.0f + static_cast<float>(rng() % 100) / 100.0f;
        }
        IvfBuildConfig cfg;
        cfg.k_coarse = k;
        cfg.train.seed = 3;
        IvfIndex idx = IvfIndex::build(base, k * per, parse_spec_string("4x{4,4}"), cfg);
        // map each coarse cell to the generator cluster via any member
        for (uint32_t c = 0; c < k; ++c) {
            REQUIRE(!idx.list_ids()[c].empty());
            uint32_t cluster = truth[idx.list_ids()[c][0]];
            for (uint32_t id : idx.list_ids()[c]) CHECK(truth[id] == cluster);
        }
    }
    SECTION("partition property: lists are disjoint and cover the database") {
        auto base = testutil::clustered_data(500, d, 10, 41);
        IvfBuildConfig cfg;
        cfg.k_coarse = 8;
        cfg.train.seed = 5;
        IvfIndex idx = IvfIndex::build(base, 500, parse_spec_string("4x{4,4}"), cfg);
        std::set<uint32_t> seen;
        for (uint32_t c = 0; c < idx.cells(); ++c)
            for (uint32_t id : idx.list_ids()[c]) CHECK(seen.insert(id).second);
        CHECK(seen.size() == 500);
    }
    SECTION("fewer vectors than K is a build error") {
        auto base = testutil::clustered_data(10, d, 2, 51);
        IvfBuildConfig cfg;
        cfg.k_coarse = 32;
        CHECK_THROWS_AS(IvfIndex::build(base, 10, parse_spec_string("4x{4,4}"), cfg), training_error);
    }
    SECTION("same seed rebuild is bit-identical on disk") {
        auto base = testutil::clustered_data(400, d, 10, 61);
        IvfBuildConfig cfg;
        cfg.k_coarse = 8;
        cfg.train.seed = 7;
        auto serialize = [&] {
            IvfIndex idx = IvfIndex::build(base, 400, parse_spec_string("4x{4,4}"), cfg);
            std::string path = "ivf_determinism_tmp.bin";
            io::save_ivf_index(path, idx);
            std::ifstream is(path, std::ios::binary);
            std::stringstream ss;
            ss << is.rdbuf();
            std::remove(path.c_str());
            return ss.str();
        };
        CHECK(serialize() == serialize());
    }
}

TEST_CASE("ivf search with a == K and the float kernel equals per-cell brute force") {
    const size_t d = 24, n = 2000;
    auto base = testutil::clustered_data(n, d, 25, 71);
    IvfBuildConfig cfg;
    cfg.k_coarse = 16;
    cfg.train.seed = 9;
    IvfIndex idx = IvfIndex::build(base, n, parse_spec_string("6x{4,4}"), cfg);

    auto queries = testutil::clustered_data(8, d, 25, 72);
    SearchParams p;
    p.probes = 16;
    p.r = 30;
    p.t = 100;
    p.forced_kernel = KernelFamily::scalar_float;
    for (size_t q = 0; q < 8; ++q) {
        std::span<const float> qu{queries.data() + q * d, d};
        auto res = idx.search(qu, p);

        CandidateHeap<float> want(p.r);
        std::vector<float> residual(d);
        for (uint32_t c = 0; c < idx.cells(); ++c) {
            auto ctr = idx.coarse_centroid(c);
            for (size_t j = 0; j < d; ++j) residual[j] = qu[j] - ctr[j];
            auto dt = compute_tables(residual, idx.codebook());
            for (uint32_t pos = 0; pos < idx.list_ids()[c].size(); ++pos) {
                uint32_t id = idx.list_ids()[c][pos];
                want.push(adc_scalar_float(idx.code_of(id), dt), id);
            }
        }
        auto ws = want.sorted();
        REQUIRE(res.ids.size() == ws.size());
        for (size_t i = 0; i < ws.size(); ++i) {
            CHECK(res.ids[i] == ws[i].id);
            CHECK(res.dists[i] == ws[i].dist);
        }
    }
}

TEST_CASE("a database vector queried on a losslessly-encodable dataset comes back first") {
    // every cluster carries the same 64 offset vectors, so residuals take only
    // 2^4 distinct values per slice and PQ training reproduces them exactly
    std::mt19937_64 rng(81);
    const size_t d = 8, k = 4, per = 64, n = k * per;
    std::vector<float> offsets(per * d);
    for (auto& v : offsets) v = static_cast<float>(rng() % 16);
    std::vector<float> base(n * d);
    for (size_t i = 0; i < n; ++i) {
        size_t c = i / per, o = i % per;
        for (size_t j = 0; j < d; ++j) base[i * d + j] = static_cast<float>(c) * 500.0f + offsets[o * d + j];
    }
    IvfBuildConfig cfg;
    cfg.k_coarse = k;
    cfg.train.seed = 11;
    cfg.train.kmeans_iters = 50;
    IvfIndex idx = IvfIndex::build(base, n, parse_spec_string("8x{4,4}"), cfg);
    SearchParams p;
    p.probes = k;
    p.r = 5;
    p.t = 40;
    p.forced_kernel = KernelFamily::scalar_float;
    size_t hits = 0, trials = 20;
    for (size_t t = 0; t < trials; ++t) {
        uint32_t target = static_cast<uint32_t>(rng() % n);
        auto res = idx.search({base.data() + target * d, d}, p);
        REQUIRE(!res.ids.empty());
        if (res.ids[0] == target && res.dists[0] == 0.0f) ++hits;
    }
    CHECK(hits == trials);
}

TEST_CASE("probed candidate sets grow with a and recall never drops") {
    const size_t d = 16, n = 3000;
    auto base = testutil::clustered_data(n, d, 40, 91);
    IvfBuildConfig cfg;
    cfg.k_coarse = 32;
    cfg.train.seed = 13;
    IvfIndex idx = IvfIndex::build(base, n, parse_spec_string("4x{4,4}"), cfg);
    auto queries = testutil::clustered_data(20, d, 40, 92);

    std::vector<std::vector<uint32_t>> gt(20);
    for (size_t q = 0; q < 20; ++q) gt[q] = testutil::brute_force_nn(base, n, queries.data() + q * d, d, 1);

    double prev_recall = -1.0;
    std::vector<std::vector<uint32_t>> prev_cands(20);
    for (uint32_t a : {1u, 2u, 4u, 8u, 16u}) {
        std::vector<std::vector<uint32_t>> results(20);
        for (size_t q = 0; q < 20; ++q) {
            std::span<const float> qu{queries.data() + q * d, d};
            auto cands = idx.probed_candidates(qu, a);
            CHECK(std::includes(cands.begin(), cands.end(), prev_cands[q].begin(), prev_cands[q].end()));
            prev_cands[q] = std::move(cands);
            SearchParams p;
            p.probes = a;
            p.r = 100;
            p.t = 100;
            results[q] = idx.search(qu, p).ids;
        }
        const uint32_t ranks[] = {100};
        double r100 = evaluate_recall(results, gt, ranks)[0];
        CHECK(r100 >= prev_recall);
        prev_recall = r100;
    }
    CHECK(prev_recall > 0.5); // probing half the cells should find most true neighbors
}

TEST_CASE("increasing a never worsens the worst kept distance (float path)") {
    const size_t d = 16, n = 1500;
    auto base = testutil::clustered_data(n, d, 20, 95);
    IvfBuildConfig cfg;
    cfg.k_coarse = 16;
    cfg.train.seed = 17;
    IvfIndex idx = IvfIndex::build(base, n, parse_spec_string("4x{4,4}"), cfg);
    auto queries = testutil::clustered_data(10, d, 20, 96);
    for (size_t q = 0; q < 10; ++q) {
        std::span<const float> qu{queries.data() + q * d, d};
        float prev_worst = std::numeric_limits<float>::infinity();
        std::set<uint32_t> prev_found;
        for (uint32_t a : {1u, 2u, 4u, 8u, 16u}) {
            SearchParams p;
            p.probes = a;
            p.r = 20;
            p.t = 20;
            p.forced_kernel = KernelFamily::scalar_float;
            auto res = idx.search(qu, p);
            if (res.ids.size() == p.r) { // only meaningful once the heap fills
                CHECK(res.dists.back() <= prev_worst);
                prev_worst = res.dists.back();
            }
            // every previously-found id whose distance beats the new worst is still there
            std::set<uint32_t> found(res.ids.begin(), res.ids.end());
            for (uint32_t id : prev_found)
                if (res.ids.size() < p.r) CHECK(found.count(id));
            prev_found = std::move(found);
        }
    }
}

TEST_CASE("rerank orders the final set by exact reconstruction distance") {
    const size_t d = 32, n = 2000;
    Codebook cb = small_codebook(d, 19);
    auto base = testutil::clustered_data(n, d, 30, 97);
    FlatIndex idx = FlatIndex::encode_database(base, n, cb);
    auto queries = testutil::clustered_data(5, d, 30, 98);
    for (size_t q = 0; q < 5; ++q) {
        std::span<const float> qu{queries.data() + q * d, d};
        SearchParams p;
        p.r = 25;
        p.rerank = true;
        auto res = idx.search(qu, p);
        auto dt = compute_tables(qu, cb);
        std::set<uint32_t> set_rr(res.ids.begin(), res.ids.end());
        SearchParams p0 = p;
        p0.rerank = false;
        auto base_res = idx.search(qu, p0);
        CHECK(set_rr == std::set<uint32_t>(base_res.ids.begin(), base_res.ids.end())); // same set, new order
        for (size_t i = 0; i < res.ids.size(); ++i)
            CHECK(res.dists[i] == adc_scalar_float(idx.code_at(res.ids[i]), dt));
        for (size_t i = 1; i < res.dists.size(); ++i) CHECK(res.dists[i] >= res.dists[i - 1]);
    }
}

TEST_CASE("evaluate_recall") {
    SECTION("results identical to ground truth give R@1 == 1") {
        std::vector<std::vector<uint32_t>> res = {{1, 2}, {5, 6}, {9, 0}};
        std::vector<std::vector<uint32_t>> gt = {{1}, {5}, {9}};
        const uint32_t ranks[] = {1, 100};
        auto r = evaluate_recall(res, gt, ranks);
        CHECK(r[0] == 1.0);
        CHECK(r[1] == 1.0);
    }
    SECTION("true neighbor always at rank 50: R@1 == 0, R@100 == 1") {
        std::vector<std::vector<uint32_t>> res(4), gt(4);
        for (size_t q = 0; q < 4; ++q) {
            res[q].resize(100);
            for (size_t i = 0; i < 100; ++i) res[q][i] = static_cast<uint32_t>(1000 * q + i);
            res[q][49] = 77777 + static_cast<uint32_t>(q);
            gt[q] = {77777 + static_cast<uint32_t>(q)};
        }
        const uint32_t ranks[] = {1, 100};
        auto r = evaluate_recall(res, gt, ranks);
        CHECK(r[0] == 0.0);
        CHECK(r[1] == 1.0);
    }
    SECTION("random permutation baseline sits near 1/n") {
        // analytic expectation 1/1000; 3-sigma band over many trials
        const size_t n = 1000, trials = 6000;
        std::mt19937_64 rng(123);
        size_t hits = 0;
        for (size_t t = 0; t < trials; ++t) {
            uint32_t truth = static_cast<uint32_t>(rng() % n);
            uint32_t first = static_cast<uint32_t>(rng() % n); // random ranking's top-1
            if (first == truth) ++hits;
        }
        double p = 1.0 / n;
        double sigma = std::sqrt(p * (1 - p) / trials);
        CHECK(std::abs(static_cast<double>(hits) / trials - p) <= 3 * sigma + 1e-12);
    }
    SECTION("mismatched query counts are input errors") {
        std::vector<std::vector<uint32_t>> res = {{1}};
        std::vector<std::vector<uint32_t>> gt = {{1}, {2}};
        const uint32_t ranks[] = {1};
        CHECK_THROWS_AS(evaluate_recall(res, gt, ranks), input_error);
        std::vector<std::vector<uint32_t>> empty_gt = {{}};
        CHECK_THROWS_AS(evaluate_recall(res, empty_gt, ranks), input_error);
    }
}

TEST_CASE("serialization round-trips give bit-identical search results") {
    const size_t d = 16, n = 800;
    auto base = testutil::clustered_data(n, d, 12, 101);
    auto queries = testutil::clustered_data(6, d, 12, 102);

    SECTION("flat") {
        Codebook cb = small_codebook(d, 23, "4x{4,4}");
        FlatIndex idx = FlatIndex::encode_database(base, n, cb);
        io::save_flat_index("flat_tmp.bin", idx);
        FlatIndex loaded = io::load_flat_index("flat_tmp.bin");
        std::remove("flat_tmp.bin");
        SearchParams p;
        p.r = 20;
        for (size_t q = 0; q < 6; ++q) {
            std::span<const float> qu{queries.data() + q * d, d};
            auto a = idx.search(qu, p), b = loaded.search(qu, p);
            CHECK(a.ids == b.ids);
            CHECK(a.dists == b.dists);
        }
    }
    SECTION("ivf") {
        IvfBuildConfig cfg;
        cfg.k_coarse = 8;
        cfg.train.seed = 29;
        IvfIndex idx = IvfIndex::build(base, n, parse_spec_string("4x{4,4}"), cfg);
        io::save_ivf_index("ivf_tmp.bin", idx);
        IvfIndex loaded = io::load_ivf_index("ivf_tmp.bin");
        std::remove("ivf_tmp.bin");
        SearchParams p;
        p.r = 20;
        p.probes = 4;
        for (size_t q = 0; q < 6; ++q) {
            std::span<const float> qu{queries.data() + q * d, d};
            auto a = idx.search(qu, p), b = loaded.search(qu, p);
            CHECK(a.ids == b.ids);
            CHECK(a.dists == b.dists);
        }
    }
}
