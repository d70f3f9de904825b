// pqscan command-line driver: train codebooks, build flat/IVF indexes, run
// searches, evaluate recall, sweep probe counts, and self-test the kernels.

#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pqscan/pqscan.hpp"
#include "pqscan/selftest.hpp"

namespace {

using namespace pqscan;

// Exit codes (also in the README): 0 ok, 1 selftest mismatch, 2 usage,
// 3 file problems, 4 bad spec, 5 bad input/dimension mismatch,
// 6 corrupted data, 7 bad configuration, 8 training failure, 9 calibration.
constexpr int kExitSelftest = 1;
constexpr int kExitIo = 3;
constexpr int kExitSpec = 4;
constexpr int kExitInput = 5;
constexpr int kExitCorruption = 6;
constexpr int kExitConfig = 7;
constexpr int kExitTraining = 8;
constexpr int kExitCalibration = 9;

struct TrainArgs {
    std::string data, spec, out;
    uint64_t seed = 0;
    uint32_t kmeans_iters = 25;
    uint64_t max_samples = 0;
};

struct BuildArgs {
    std::string data, out, codebook, spec, coarse = "ivf";
    bool flat = false;
    uint32_t k_coarse = 4096;
    uint64_t seed = 0;
    uint32_t kmeans_iters = 25;
};

struct SearchArgs {
    std::string index, queries, out_ids, out_dists, latency_csv, kernel = "auto", dump_tables;
    uint32_t r = 100, probes = 1, t = 400;
    bool rerank = false;
    uint32_t threads = 0;
};

struct EvalArgs {
    std::string results, gt, latency_csv;
};

struct BenchArgs {
    std::string index, queries, gt, out, kernel = "auto";
    std::vector<uint32_t> probes{1, 2, 4, 8, 16};
    uint32_t r = 100, t = 400, threads = 0;
};

struct SelftestArgs {
    uint64_t trials = 10000;
    uint64_t seed = 1;
};

std::optional<KernelFamily> parse_kernel(const std::string& s) {
    if (s == "auto") return std::nullopt;
    auto f = kernel_from_string(s);
    if (!f) throw config_error("unknown kernel '" + s + "'");
    return f;
}

void warn_spec(const PqSpec& spec) {
    if (!spec.exact_allocation())
        std::cerr << "warning: " << spec.total_dims() << " dimensions do not divide proportionally for "
                  << spec.to_string() << "; leftover dimensions were assigned one by one (this costs accuracy; "
                  << "prefer a dimension count that divides exactly)\n";
    if (spec.num_groups() % 2 != 0)
        std::cerr << "warning: " << spec.to_string() << " has an odd group count (" << spec.num_groups()
                  << "); multi-index-style coarse quantizers would need an even one\n";
}

int cmd_train(const TrainArgs& a) {
    auto vecs = io::load_vectors(a.data, a.max_samples);
    if (vecs.count == 0) throw input_error(a.data + ": empty training set");
    SpecPattern pat = parse_spec_string(a.spec);
    if (to_string(pat) != a.spec)
        std::cerr << "note: spec normalized to " << to_string(pat) << "\n";
    PqSpec spec = allocate_dims(static_cast<uint32_t>(vecs.dim), pat);
    warn_spec(spec);
    TrainConfig tc;
    tc.seed = a.seed;
    tc.kmeans_iters = a.kmeans_iters;
    Codebook cb = train_codebook(vecs.data, vecs.count, spec, tc);
    io::save_codebook(a.out, cb);
    std::cout << "trained " << spec.to_string() << " on " << vecs.count << " vectors (" << vecs.dim
              << " dims), wrote " << a.out << "\n";
    return 0;
}

int cmd_build(const BuildArgs& a) {
    if (a.coarse != "ivf")
        throw config_error("coarse index '" + a.coarse +
                           "' is not supported: only the IVF coarse quantizer is implemented "
                           "(multi-index and graph-based coarse indexes are out of scope)");
    auto vecs = io::load_vectors(a.data);
    if (a.flat) {
        if (a.codebook.empty()) throw config_error("--flat requires --codebook");
        Codebook cb = io::load_codebook(a.codebook);
        if (cb.spec().total_dims() != vecs.dim)
            throw input_error("codebook dims " + std::to_string(cb.spec().total_dims()) +
                              " != dataset dims " + std::to_string(vecs.dim));
        FlatIndex idx = FlatIndex::encode_database(vecs.data, vecs.count, std::move(cb));
        io::save_flat_index(a.out, idx);
        std::cout << "encoded " << vecs.count << " vectors into flat index " << a.out << "\n";
        return 0;
    }
    if (a.spec.empty()) throw config_error("ivf build requires --spec");
    SpecPattern pat = parse_spec_string(a.spec);
    IvfBuildConfig cfg;
    cfg.k_coarse = a.k_coarse;
    cfg.train.seed = a.seed;
    cfg.train.kmeans_iters = a.kmeans_iters;
    IvfIndex idx = IvfIndex::build(vecs.data, vecs.count, pat, cfg);
    warn_spec(idx.codebook().spec());
    io::save_ivf_index(a.out, idx);
    std::cout << "built ivf index: K=" << idx.cells() << ", " << idx.size() << " vectors, spec "
              << idx.codebook().spec().to_string() << ", wrote " << a.out << "\n";
    return 0;
}

struct QueryRun {
    std::vector<std::vector<uint32_t>> ids;
    std::vector<std::vector<float>> dists;
    std::vector<double> time_us;
};

template <class SearchOne>
QueryRun run_queries(size_t nq, uint32_t threads, SearchOne&& search_one) {
    QueryRun run;
    run.ids.resize(nq);
    run.dists.resize(nq);
    run.time_us.resize(nq);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t q = next.fetch_add(1);
            if (q >= nq) break;
            auto t0 = std::chrono::steady_clock::now();
            SearchResult res = search_one(q);
            auto t1 = std::chrono::steady_clock::now();
            run.time_us[q] = std::chrono::duration<double, std::micro>(t1 - t0).count();
            run.ids[q] = std::move(res.ids);
            run.dists[q] = std::move(res.dists);
        }
    };
    std::vector<std::thread> pool;
    for (uint32_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return run;
}

void dump_tables_csv(const std::string& path, const DistanceTables& dt, const QuantizedTables& qt) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot write " + path);
    os << "sub,index,float,quantized\n";
    for (size_t j = 0; j < dt.tables.size(); ++j)
        for (size_t i = 0; i < dt.tables[j].size(); ++i)
            os << j << ',' << i << ',' << dt.tables[j][i] << ',' << qt.entry(j, i) << '\n';
}

int cmd_search(const SearchArgs& a) {
    auto queries = io::load_vectors(a.queries);
    SearchParams params;
    params.r = a.r;
    params.probes = a.probes;
    params.t = a.t;
    params.rerank = a.rerank;
    params.forced_kernel = parse_kernel(a.kernel);

    QueryRun run;
    bool fallback_reported = false;
    std::atomic<int> kernel_used{-1};
    auto note_fallback = [&](const SearchResult& r) {
        kernel_used.store(static_cast<int>(r.kernel));
        if (r.scalar_fallback && !fallback_reported) {
            std::cerr << "note: no vector kernel for this spec on this host; using scalar-quantized\n";
            fallback_reported = true;
        }
    };

    const auto kind = io::peek_index_kind(a.index);
    if (kind == io::IndexKind::flat) {
        FlatIndex idx = io::load_flat_index(a.index);
        if (idx.codebook().spec().total_dims() != queries.dim)
            throw input_error("query dims " + std::to_string(queries.dim) + " != index dims " +
                              std::to_string(idx.codebook().spec().total_dims()));
        if (!a.dump_tables.empty() && queries.count > 0 && idx.size() > 0) {
            DistanceTables dt = compute_tables(queries.row(0), idx.codebook());
            std::vector<float> prefix;
            collect_prefix_float(idx.list(), idx.scheme(), dt, params.t, prefix);
            const uint32_t r_eff = static_cast<uint32_t>(std::min<size_t>(params.r, prefix.size()));
            auto [dmin, dmax] = calibrate_bounds(dt, prefix, r_eff);
            dump_tables_csv(a.dump_tables, dt, quantize_tables(dt, dmin, dmax, idx.scheme().word_width));
        }
        run = run_queries(queries.count, a.threads, [&](size_t q) {
            auto r = idx.search(queries.row(q), params);
            note_fallback(r);
            return r;
        });
    } else {
        IvfIndex idx = io::load_ivf_index(a.index);
        if (idx.dims() != queries.dim)
            throw input_error("query dims " + std::to_string(queries.dim) + " != index dims " +
                              std::to_string(idx.dims()));
        run = run_queries(queries.count, a.threads, [&](size_t q) {
            auto r = idx.search(queries.row(q), params);
            note_fallback(r);
            return r;
        });
    }

    if (!a.out_ids.empty()) io::save_ivecs(a.out_ids, run.ids);
    if (!a.out_dists.empty()) io::save_fvecs(a.out_dists, run.dists);
    if (!a.latency_csv.empty()) {
        std::ofstream os(a.latency_csv);
        if (!os) throw io_error("cannot write " + a.latency_csv);
        os << "query_id,probes,time_us,results_found\n";
        for (size_t q = 0; q < run.ids.size(); ++q)
            os << q << ',' << a.probes << ',' << std::fixed << std::setprecision(1) << run.time_us[q] << ','
               << run.ids[q].size() << '\n';
    }
    double mean_us = 0;
    for (double u : run.time_us) mean_us += u;
    if (!run.time_us.empty()) mean_us /= static_cast<double>(run.time_us.size());
    std::cout << run.ids.size() << " queries, mean " << std::fixed << std::setprecision(3) << mean_us / 1000.0
              << " ms/query";
    if (kernel_used.load() >= 0) std::cout << " [" << to_string(static_cast<KernelFamily>(kernel_used.load())) << "]";
    std::cout << "\n";
    return 0;
}

std::vector<std::vector<uint32_t>> ivecs_rows(const io::IntVectors& v) {
    std::vector<std::vector<uint32_t>> rows(v.count);
    for (size_t i = 0; i < v.count; ++i) {
        rows[i].resize(v.dim);
        for (size_t j = 0; j < v.dim; ++j) rows[i][j] = static_cast<uint32_t>(v.data[i * v.dim + j]);
    }
    return rows;
}

int cmd_eval(const EvalArgs& a) {
    auto results = ivecs_rows(io::load_ivecs(a.results));
    auto gt = ivecs_rows(io::load_ivecs(a.gt));
    const uint32_t ranks[] = {1, 100};
    auto recall = evaluate_recall(results, gt, ranks);
    std::cout << "R@1 " << std::fixed << std::setprecision(3) << recall[0] << "\n";
    std::cout << "R@100 " << std::fixed << std::setprecision(3) << recall[1] << "\n";
    if (!a.latency_csv.empty()) {
        std::ifstream is(a.latency_csv);
        if (!is) throw io_error("cannot open " + a.latency_csv);
        std::string line;
        std::getline(is, line); // header
        double total_us = 0;
        size_t n = 0;
        while (std::getline(is, line)) {
            std::stringstream ss(line);
            std::string field;
            std::getline(ss, field, ','); // query_id
            std::getline(ss, field, ','); // probes
            std::getline(ss, field, ','); // time_us
            total_us += std::stod(field);
            ++n;
        }
        if (n) std::cout << "mean query time " << std::fixed << std::setprecision(3) << total_us / n / 1000.0
                         << " ms\n";
    }
    return 0;
}

int cmd_bench(const BenchArgs& a) {
    auto queries = io::load_vectors(a.queries);
    auto gt = ivecs_rows(io::load_ivecs(a.gt));
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) throw io_error("cannot write " + a.out);
        out = &file;
    }
    *out << "probes,r_at_1,r_at_100,mean_ms\n";

    const auto kind = io::peek_index_kind(a.index);
    FlatIndex flat;
    IvfIndex ivf;
    if (kind == io::IndexKind::flat)
        flat = io::load_flat_index(a.index);
    else
        ivf = io::load_ivf_index(a.index);

    for (uint32_t probes : a.probes) {
        SearchParams params;
        params.r = a.r;
        params.t = a.t;
        params.probes = probes;
        params.forced_kernel = parse_kernel(a.kernel);
        QueryRun run = run_queries(queries.count, a.threads, [&](size_t q) {
            return kind == io::IndexKind::flat ? flat.search(queries.row(q), params)
                                               : ivf.search(queries.row(q), params);
        });
        const uint32_t ranks[] = {1, 100};
        auto recall = evaluate_recall(run.ids, gt, ranks);
        double mean_us = 0;
        for (double u : run.time_us) mean_us += u;
        mean_us /= std::max<size_t>(1, run.time_us.size());
        *out << probes << ',' << std::fixed << std::setprecision(4) << recall[0] << ',' << recall[1] << ','
             << std::setprecision(4) << mean_us / 1000.0 << "\n";
    }
    return 0;
}

int cmd_selftest(const SelftestArgs& a) {
    bool any_fail = false;
    for (const auto& [pattern, ms] : selftest::family_specs()) {
        auto rep = selftest::differential_trials(pattern, ms, a.trials, a.seed);
        if (!rep) {
            std::cout << "diff " << pattern << ": no vector kernel on this host, trivially ok\n";
            continue;
        }
        std::cout << "diff " << pattern << " [" << to_string(rep->kernel) << "]: " << rep->trials - rep->mismatches
                  << "/" << rep->trials << " identical";
        if (rep->mismatches) {
            std::cout << "  FIRST MISMATCH " << rep->first_mismatch;
            any_fail = true;
        }
        std::cout << "\n";
    }
    auto split = selftest::split_table_exhaustive();
    if (split.ran_u16 || split.ran_u8) {
        std::cout << "split-table exhaustive (" << (split.ran_u16 ? "u16 " : "") << (split.ran_u8 ? "u8" : "")
                  << "): " << (split.mismatches ? "MISMATCHES" : "ok") << "\n";
        if (split.mismatches) any_fail = true;
    } else {
        std::cout << "split-table exhaustive: no AVX-512 host, skipped\n";
    }
    return any_fail ? kExitSelftest : 0;
}

int cmd_caps() {
    SimdCaps comp = SimdCaps::compiled(), run = SimdCaps::runtime(), avail = SimdCaps::available();
    std::cout << "compiled:  " << comp.describe() << "\n";
    std::cout << "runtime:   " << run.describe() << "\n";
    std::cout << "available: " << avail.describe() << "\n\n";
    std::cout << "kernel selection per spec family:\n";
    for (const auto& [pattern, ms] : selftest::family_specs()) {
        PqSpec spec = allocate_dims(16 * ms.back(), parse_spec_string(std::to_string(ms.back()) + "x" + pattern));
        std::cout << "  " << std::left << std::setw(10) << pattern << " -> "
                  << to_string(select_kernel(spec, avail)) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"product-quantization ANN search with register-table scan kernels"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* ct = app.add_subcommand("train", "train a (possibly irregular) PQ codebook");
    ct->add_option("--data", train.data, "training vectors (.fvecs/.bvecs)")->required();
    ct->add_option("--spec", train.spec, "quantizer spec, e.g. 16x{4,4} or 12x{6,6,4}")->required();
    ct->add_option("--out", train.out, "output codebook file")->required();
    ct->add_option("--seed", train.seed, "RNG seed");
    ct->add_option("--kmeans-iters", train.kmeans_iters, "max k-means iterations");
    ct->add_option("--max-samples", train.max_samples, "cap on training vectors (0 = all)");

    BuildArgs build;
    auto* cb = app.add_subcommand("build", "encode a database into a flat or IVF index");
    cb->add_option("--data", build.data, "database vectors (.fvecs/.bvecs)")->required();
    cb->add_option("--out", build.out, "output index file")->required();
    cb->add_flag("--flat", build.flat, "flat exhaustive index (vectors encoded directly)");
    cb->add_option("--codebook", build.codebook, "pre-trained codebook (flat mode)");
    cb->add_option("--spec", build.spec, "quantizer spec (ivf mode; trained on residuals)");
    cb->add_option("-K,--cells", build.k_coarse, "IVF cell count");
    cb->add_option("--coarse", build.coarse, "coarse index type (only 'ivf')");
    cb->add_option("--seed", build.seed, "RNG seed");
    cb->add_option("--kmeans-iters", build.kmeans_iters, "max k-means iterations");

    SearchArgs search;
    auto* cs = app.add_subcommand("search", "run queries against an index");
    cs->add_option("--index", search.index, "index file")->required();
    cs->add_option("--queries", search.queries, "query vectors (.fvecs/.bvecs)")->required();
    cs->add_option("-k,--results", search.r, "results per query (R)");
    cs->add_option("--probes", search.probes, "IVF cells to visit (a)");
    cs->add_option("-t,--calibration", search.t, "calibration prefix length");
    cs->add_option("--kernel", search.kernel,
                   "auto|scalar-float|scalar-quantized|shuffle16x8|permute32x16|split-table-16|split-table-8");
    cs->add_flag("--rerank", search.rerank, "re-rank final top-R by decoded float ADC");
    cs->add_option("--threads", search.threads, "worker threads (0 = cores)");
    cs->add_option("--out-ids", search.out_ids, "write result ids (.ivecs)");
    cs->add_option("--out-dists", search.out_dists, "write result distances (.fvecs)");
    cs->add_option("--latency-csv", search.latency_csv, "write per-query latency CSV");
    cs->add_option("--dump-tables", search.dump_tables, "dump first query's distance tables as CSV");

    EvalArgs eval;
    auto* ce = app.add_subcommand("eval", "recall of search results against ground truth");
    ce->add_option("--results", eval.results, "result ids (.ivecs)")->required();
    ce->add_option("--gt", eval.gt, "ground truth (.ivecs)")->required();
    ce->add_option("--latency", eval.latency_csv, "latency CSV from search");

    BenchArgs bench;
    auto* cbe = app.add_subcommand("bench", "sweep probe counts, emit recall/time CSV");
    cbe->add_option("--index", bench.index)->required();
    cbe->add_option("--queries", bench.queries)->required();
    cbe->add_option("--gt", bench.gt)->required();
    cbe->add_option("--probes", bench.probes, "probe counts to sweep")->delimiter(',');
    cbe->add_option("-k,--results", bench.r);
    cbe->add_option("-t,--calibration", bench.t);
    cbe->add_option("--kernel", bench.kernel);
    cbe->add_option("--threads", bench.threads);
    cbe->add_option("--out", bench.out, "output CSV (default stdout)");

    SelftestArgs st;
    auto* cst = app.add_subcommand("selftest", "kernel differential suite; nonzero exit on mismatch");
    cst->add_option("--trials", st.trials, "trials per spec family");
    cst->add_option("--seed", st.seed);

    app.add_subcommand("caps", "report compiled/runtime kernel capabilities");

    try {
        app.parse(argc, argv);
        if (ct->parsed()) return cmd_train(train);
        if (cb->parsed()) return cmd_build(build);
        if (cs->parsed()) return cmd_search(search);
        if (ce->parsed()) return cmd_eval(eval);
        if (cbe->parsed()) return cmd_bench(bench);
        if (cst->parsed()) return cmd_selftest(st);
        return cmd_caps();
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const pqscan::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const pqscan::invalid_spec_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSpec;
    } catch (const pqscan::corruption_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCorruption;
    } catch (const pqscan::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const pqscan::training_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const pqscan::calibration_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCalibration;
    } catch (const pqscan::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const pqscan::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
