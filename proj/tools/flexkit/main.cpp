// flexkit command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.
// Results go to stdout, diagnostics to stderr.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "flexkit/bench.hpp"
#include "flexkit/corpus_store.hpp"
#include "flexkit/dense_index.hpp"
#include "flexkit/encoder.hpp"
#include "flexkit/errors.hpp"
#include "flexkit/eval.hpp"
#include "flexkit/pipeline_config.hpp"
#include "flexkit/preprocess.hpp"
#include "flexkit/query_cache.hpp"
#include "flexkit/refine.hpp"
#include "flexkit/retriever.hpp"
#include "flexkit/sparse_index.hpp"
#include "flexkit/web.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct Globals {
    bool json_output = false;
    std::optional<std::uint64_t> seed;
    std::string log_level = "warn";
};

json read_json(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw flexkit::IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw flexkit::FormatError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path &path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw flexkit::IoError("cannot write " + path.string());
    }
    out << text;
    if (!out.flush()) {
        throw flexkit::IoError("cannot write " + path.string());
    }
}

bool is_store_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[4] = {};
    return in.read(magic, 4) && std::memcmp(magic, "FCS1", 4) == 0;
}

/// Queries from JSONL ("query" or "question" key) or plain text, one per line.
std::vector<std::string> read_queries(const fs::path &path)
{
    std::ifstream in(path);
    if (!in) {
        throw flexkit::IoError("cannot open " + path.string());
    }
    std::vector<std::string> queries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        if (line.front() == '{') {
            const auto j = json::parse(line);
            queries.push_back(j.contains("query") ? j.at("query").get<std::string>()
                                                  : j.at("question").get<std::string>());
        } else {
            queries.push_back(line);
        }
    }
    return queries;
}

std::string snippet(std::string_view text, std::size_t width = 100)
{
    std::string out(text.substr(0, text.find('\n')));
    if (out.size() > width) {
        out.resize(width);
        out += "...";
    }
    return out;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string input;
    std::string format = "auto";
    std::string chunker = "sentence";
    std::size_t size = 128;
    std::size_t overlap = 0;
    std::string rules;
    std::string output;
};

int run_preprocess(const PreprocessArgs &a, const Globals &g)
{
    flexkit::PreprocessOptions opts;
    if (a.format != "auto") {
        opts.format = flexkit::parse_doc_format(a.format);
    }
    opts.chunker = flexkit::parse_chunker(a.chunker);
    opts.chunk_size = a.size;
    opts.chunk_overlap = a.overlap;
    opts.rules = flexkit::parse_knowledge_rules(a.rules);
    const auto result = flexkit::preprocess_directory(a.input, opts);

    std::string out;
    for (const auto &doc : result.documents) {
        out += flexkit::document_to_json_line(doc);
        out += '\n';
    }
    write_text(a.output, out);
    if (g.json_output) {
        std::cout << json{{"documents", result.documents.size()}, {"skipped", result.skipped.size()}}.dump() << "\n";
    } else {
        std::cout << "wrote " << result.documents.size() << " documents to " << a.output << " (" << result.skipped.size()
                  << " files skipped)\n";
    }
    return 0;
}

struct StoreBuildArgs {
    std::string schema = "text,title";
    std::string input;
    std::string output;
    bool overwrite = false;
};

int run_store_build(const StoreBuildArgs &a, const Globals &g)
{
    std::vector<std::string> schema;
    std::stringstream ss(a.schema);
    for (std::string f; std::getline(ss, f, ',');) {
        if (!f.empty()) {
            schema.push_back(f);
        }
    }
    std::ifstream in(a.input);
    if (!in) {
        throw flexkit::IoError("cannot open " + a.input);
    }
    auto writer = flexkit::StoreWriter::create(a.output, schema, {.overwrite = a.overwrite});
    const auto stats = flexkit::ingest_jsonl(in, writer);
    writer.close();
    if (g.json_output) {
        std::cout << json{{"documents", stats.documents}}.dump() << "\n";
    } else {
        std::cout << "stored " << stats.documents << " documents in " << a.output << "\n";
    }
    return 0;
}

int run_store_get(const std::string &store_path, flexkit::DocId id)
{
    const flexkit::StoreReader store(store_path);
    auto doc = store.get(id);
    std::cout << flexkit::document_to_json_line(doc) << "\n";
    return 0;
}

struct EncodeArgs {
    std::string spec;
    std::string input;
    std::string field = "text";
    std::string output;
    std::size_t chunk = 256;
};

int run_encode(const EncodeArgs &a, const Globals &g)
{
    auto spec = flexkit::EncoderSpec::from_json(read_json(a.spec));
    if (g.seed) {
        spec.seed = *g.seed;
    }
    const auto encoder = flexkit::make_encoder(spec);

    std::vector<std::string> texts;
    if (is_store_file(a.input)) {
        const flexkit::StoreReader store(a.input);
        if (!store.has_field(a.field)) {
            throw flexkit::InvalidArgument("store has no field '" + a.field + "'");
        }
        store.for_each([&](const flexkit::Document &d) {
            const auto it = d.fields.find(a.field);
            texts.push_back(it == d.fields.end() ? std::string() : it->second);
        });
    } else {
        std::ifstream in(a.input);
        if (!in) {
            throw flexkit::IoError("cannot open " + a.input);
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            const auto j = json::parse(line);
            texts.push_back(j.value(a.field, std::string()));
        }
    }

    std::vector<float> matrix;
    matrix.reserve(texts.size() * encoder->dimension());
    for (std::size_t begin = 0; begin < texts.size(); begin += a.chunk) {
        const auto n = std::min(a.chunk, texts.size() - begin);
        for (const auto &e : encoder->encode_batch(std::span(texts).subspan(begin, n))) {
            matrix.insert(matrix.end(), e.values.begin(), e.values.end());
        }
    }
    flexkit::write_embedding_matrix(a.output, matrix);
    if (g.json_output) {
        std::cout << json{{"rows", texts.size()}, {"dimension", encoder->dimension()}}.dump() << "\n";
    } else {
        std::cout << "encoded " << texts.size() << " rows of dimension " << encoder->dimension() << " into "
                  << a.output << "\n";
    }
    return 0;
}

struct IndexBuildArgs {
    std::string type = "bm25";
    std::vector<std::string> paths;
    // bm25
    std::string field = "text";
    double k1 = 1.5;
    double b = 0.75;
    bool stopwords = false;
    bool stem = false;
    // dense
    std::string emb;
    std::size_t dim = 0;
    std::string metric = "ip";
    bool auto_size = false;
    std::size_t nlist = 0;
    std::size_t nprobe = 0;
    std::size_t m = 0;
    int nbits = 8;
};

int run_index_build(const IndexBuildArgs &a, const Globals &g)
{
    const std::uint64_t seed = g.seed.value_or(0);
    json summary{{"type", a.type}};
    if (a.type == "bm25") {
        if (a.paths.size() != 2) {
            throw CLI::ValidationError("index build --type bm25 expects STORE OUT");
        }
        const flexkit::StoreReader store(a.paths[0]);
        flexkit::SparseBuildOptions opts;
        opts.params = {a.k1, a.b};
        opts.analyzer = {.remove_stopwords = a.stopwords, .stem = a.stem};
        opts.build_seed = seed;
        const auto id = flexkit::build_sparse_index(store, a.field, a.paths[1], opts);
        summary["build_id"] = id.hex();
        summary["documents"] = store.size();
    } else if (a.type == "flat" || a.type == "ivfpq") {
        if (a.paths.size() != 1) {
            throw CLI::ValidationError("index build --type " + a.type + " expects OUT");
        }
        if (a.emb.empty() || a.dim == 0) {
            throw CLI::ValidationError("dense index builds need --emb and --dim");
        }
        const auto vectors = flexkit::read_embedding_matrix(a.emb, a.dim);
        const auto n = vectors.size() / a.dim;
        const auto metric = flexkit::parse_metric(a.metric);
        if (a.type == "flat") {
            summary["build_id"] = flexkit::build_flat_index(vectors, a.dim, metric, a.paths[0], seed).hex();
        } else {
            flexkit::IvfPqParams params = flexkit::size_ivfpq(n, a.dim);
            if (!a.auto_size && (a.nlist == 0 || a.m == 0)) {
                throw CLI::ValidationError("ivfpq needs --auto-size or both --nlist and --m");
            }
            if (a.nlist) {
                params.nlist = a.nlist;
                params.nprobe = std::min(params.nprobe, a.nlist);
            }
            if (a.nprobe) {
                params.nprobe = a.nprobe;
            }
            if (a.m) {
                params.m = a.m;
            }
            params.nbits = a.nbits;
            params.metric = metric;
            const auto stats = flexkit::build_ivfpq_index(vectors, a.dim, params, seed, a.paths[0]);
            summary["build_id"] = stats.build_id.hex();
            summary["nlist"] = params.nlist;
            summary["nprobe"] = params.nprobe;
            summary["m"] = params.m;
            summary["nbits"] = params.nbits;
            summary["training_samples"] = stats.training_samples;
        }
        summary["vectors"] = n;
    } else {
        throw CLI::ValidationError("unknown index type '" + a.type + "'");
    }
    if (g.json_output) {
        std::cout << summary.dump() << "\n";
    } else {
        std::cout << "built " << a.type << " index " << a.paths.back() << " (build id "
                  << summary["build_id"].get<std::string>() << ")\n";
    }
    return 0;
}

struct SearchArgs {
    std::string config;
    std::string query;
    std::size_t k = 0;
    bool no_cache = false;
    std::string cache_dir;
};

int run_search(const SearchArgs &a, const Globals &g)
{
    const auto cfg = flexkit::load_pipeline_config(a.config);
    const flexkit::Retriever retriever(cfg.retriever);
    const std::size_t k = a.k ? a.k : cfg.retriever.final_k;

    std::vector<flexkit::RetrievedContext> results;
    bool hit = false;
    if (cfg.cache.enabled && !a.no_cache) {
        flexkit::QueryCache cache(a.cache_dir.empty() ? cfg.cache.dir : fs::path(a.cache_dir), cfg.cache.capacity);
        std::tie(results, hit) = flexkit::cached_retrieve(cache, retriever, a.query, k);
    } else {
        results = retriever.retrieve(a.query, k);
    }
    results = flexkit::refine(std::move(results), cfg.retriever.refine);
    spdlog::info("search: {} results, cache {}", results.size(), hit ? "hit" : "miss");

    if (g.json_output) {
        std::cout << json{{"query", a.query}, {"k", k}, {"cache_hit", hit}, {"results", flexkit::to_json(results)}}.dump()
                  << "\n";
    } else {
        for (const auto &r : results) {
            std::cout << r.rank << "\t" << r.doc_id << "\t" << r.fused_score << "\t" << snippet(r.text) << "\n";
        }
    }
    return 0;
}

struct WebFetchArgs {
    std::string query;
    std::size_t k = 5;
    std::string seeker;
    std::string out;
    bool no_robots = false;
    double rate = 1.0;
    int timeout_ms = 10000;
    std::size_t max_bytes = 5u << 20;
    std::size_t concurrency = 4;
    int attempts = 3;
};

int run_web_fetch(const WebFetchArgs &a, const Globals &g)
{
    const auto seeker = flexkit::load_seeker(a.seeker);
    flexkit::DownloadPolicy policy;
    policy.respect_robots = !a.no_robots;
    policy.rate_per_host = a.rate;
    policy.timeout = std::chrono::milliseconds(a.timeout_ms);
    policy.max_bytes = a.max_bytes;
    policy.attempts = a.attempts;
    const flexkit::Downloader downloader(policy);
    const auto result = flexkit::web_retrieve(a.query, a.k, *seeker, downloader, {.concurrency = a.concurrency});

    std::string lines;
    for (const auto &ctx : result.contexts) {
        lines += flexkit::to_json(ctx).dump();
        lines += '\n';
    }
    if (!a.out.empty()) {
        write_text(a.out, lines);
    }
    if (g.json_output) {
        json failures = json::array();
        for (const auto &f : result.failures) {
            failures.push_back({{"url", f.url}, {"error", f.error}});
        }
        std::cout << json{{"fetched", result.contexts.size()}, {"failures", failures}}.dump() << "\n";
    } else if (a.out.empty()) {
        std::cout << lines;
    } else {
        std::cout << "fetched " << result.contexts.size() << " pages (" << result.failures.size() << " failed)\n";
    }
    return 0;
}

struct EvalArgs {
    std::string config;
    std::string dataset;
    std::string predictions;
    std::size_t k = 0;
    std::string report;
    bool timing = false;
};

int emit_report(const flexkit::EvalReport &report, const EvalArgs &a, const Globals &g)
{
    const auto j = report.to_json(a.timing);
    if (!a.report.empty()) {
        write_text(a.report, j.dump(2) + "\n");
    }
    if (g.json_output) {
        std::cout << j.dump() << "\n";
    } else {
        std::cout << report.table();
    }
    return 0;
}

int run_eval_retrieval(const EvalArgs &a, const Globals &g)
{
    const auto cfg = flexkit::load_pipeline_config(a.config);
    const flexkit::Retriever retriever(cfg.retriever);
    const auto dataset = flexkit::load_dataset(a.dataset);
    const std::size_t k = a.k ? a.k : cfg.retriever.final_k;
    return emit_report(flexkit::evaluate_retrieval(retriever, dataset, k), a, g);
}

int run_eval_generation(const EvalArgs &a, const Globals &g)
{
    const auto dataset = flexkit::load_dataset(a.dataset);
    const auto predictions = flexkit::load_predictions(a.predictions);
    return emit_report(flexkit::evaluate_generation(predictions, dataset), a, g);
}

struct BenchArgs {
    std::string config;
    std::string queries;
    std::size_t batch_size = 1;
    std::string report;
    std::string tokenizer_parallelism = "on";
    int sample_ms = 50;
    std::size_t k = 0;
};

int run_bench(const BenchArgs &a, const Globals &g)
{
    const auto cfg = flexkit::load_pipeline_config(a.config);
    const flexkit::Retriever retriever(cfg.retriever);
    const auto queries = read_queries(a.queries);
    flexkit::BenchOptions opts;
    opts.batch_size = a.batch_size;
    opts.sample_interval = std::chrono::milliseconds(a.sample_ms);
    opts.tokenizer_parallel = a.tokenizer_parallelism == "on";
    opts.k = a.k;
    const auto report = flexkit::run_bench(retriever, queries, opts);
    const auto j = report.to_json();
    if (!a.report.empty()) {
        write_text(a.report, j.dump(2) + "\n");
    }
    if (g.json_output) {
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "queries                 " << report.query_count << "\n"
                  << "batch size              " << report.batch_size << "\n"
                  << "avg wall ms / query     " << report.avg_wall_clock_ms_per_query << "\n"
                  << "total cpu s             " << report.total_cpu_time_s << "\n"
                  << "avg memory bytes        " << report.avg_memory_bytes << "\n"
                  << "peak memory bytes       " << report.peak_memory_bytes << "\n";
    }
    if (!report.valid) {
        spdlog::error("bench aborted: {}", report.error);
        return kExitRuntime;
    }
    return 0;
}

int run_bench_compare(const std::string &pa, const std::string &pb, const Globals &g)
{
    const auto a = flexkit::ResourceReport::from_json(read_json(pa));
    const auto b = flexkit::ResourceReport::from_json(read_json(pb));
    const auto cmp = flexkit::compare_reports(a, b);
    if (g.json_output) {
        std::cout << cmp.to_json().dump() << "\n";
    } else {
        std::cout << cmp.markdown;
    }
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    auto logger = spdlog::stderr_color_mt("flexkit");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"flexkit: retrieval toolkit (preprocess, index, search, web, eval, bench)", "flexkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "flexkit 0.3.0");

    Globals g;
    app.add_flag("--json", g.json_output, "Machine-readable output");
    app.add_option("--seed", g.seed, "Seed for build commands");
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    int rc = 0;
    std::function<int()> action;

    // preprocess
    PreprocessArgs pre;
    auto *preprocess = app.add_subcommand("preprocess", "Parse, chunk and filter a directory of documents into JSONL");
    preprocess->add_option("--input", pre.input, "Input directory")->required()->check(CLI::ExistingDirectory);
    preprocess->add_option("--format", pre.format, "auto|html|markdown|plain")
        ->check(CLI::IsMember({"auto", "html", "markdown", "plain"}));
    preprocess->add_option("--chunker", pre.chunker, "none|fixed|sentence")
        ->check(CLI::IsMember({"none", "fixed", "sentence"}));
    preprocess->add_option("--size", pre.size, "Chunk size in tokens")->check(CLI::PositiveNumber);
    preprocess->add_option("--overlap", pre.overlap, "Overlap in tokens (fixed chunker)");
    preprocess->add_option("--rules", pre.rules, "Knowledge rules, e.g. drop_if_shorter_than:5,dedupe_exact");
    preprocess->add_option("--output", pre.output, "Output JSONL")->required();
    preprocess->callback([&] { action = [&] { return run_preprocess(pre, g); }; });

    // store
    auto *store = app.add_subcommand("store", "Build or inspect a corpus store");
    store->require_subcommand(1);
    StoreBuildArgs sb;
    auto *store_build = store->add_subcommand("build", "Ingest corpus JSONL into a store");
    store_build->add_option("--schema", sb.schema, "Comma-separated field names");
    store_build->add_option("--input", sb.input, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    store_build->add_option("--output", sb.output, "Store file")->required();
    store_build->add_flag("--overwrite", sb.overwrite, "Replace an existing store");
    store_build->callback([&] { action = [&] { return run_store_build(sb, g); }; });
    std::string get_path;
    flexkit::DocId get_id = 0;
    auto *store_get = store->add_subcommand("get", "Print one document as JSON");
    store_get->add_option("store", get_path, "Store file")->required()->check(CLI::ExistingFile);
    store_get->add_option("id", get_id, "Document id")->required();
    store_get->callback([&] { action = [&] { return run_store_get(get_path, get_id); }; });

    // encode
    EncodeArgs enc;
    auto *encode = app.add_subcommand("encode", "Embed one field of a corpus into a raw f32 matrix");
    encode->add_option("--spec", enc.spec, "Encoder spec JSON")->required()->check(CLI::ExistingFile);
    encode->add_option("--input", enc.input, "Corpus JSONL or store")->required()->check(CLI::ExistingFile);
    encode->add_option("--field", enc.field, "Field to embed");
    encode->add_option("--output", enc.output, "Output matrix (little-endian f32 rows)")->required();
    encode->callback([&] { action = [&] { return run_encode(enc, g); }; });

    // index
    auto *index = app.add_subcommand("index", "Index commands");
    index->require_subcommand(1);
    IndexBuildArgs ib;
    auto *index_build = index->add_subcommand("build", "Build a bm25, flat or ivfpq index");
    index_build->add_option("--type", ib.type, "bm25|flat|ivfpq")->check(CLI::IsMember({"bm25", "flat", "ivfpq"}));
    index_build->add_option("paths", ib.paths, "bm25: STORE OUT; dense: OUT")->required();
    index_build->add_option("--field", ib.field, "Store field (bm25)");
    index_build->add_option("--k1", ib.k1, "BM25 k1");
    index_build->add_option("--b", ib.b, "BM25 b");
    index_build->add_flag("--stopwords", ib.stopwords, "Drop stopwords (bm25)");
    index_build->add_flag("--stem", ib.stem, "S-stemming (bm25)");
    index_build->add_option("--emb", ib.emb, "Embedding matrix (dense)");
    index_build->add_option("--dim", ib.dim, "Embedding dimension (dense)");
    index_build->add_option("--metric", ib.metric, "ip|l2")->check(CLI::IsMember({"ip", "l2"}));
    index_build->add_flag("--auto-size", ib.auto_size, "Derive nlist/nprobe/m from the data size");
    index_build->add_option("--nlist", ib.nlist, "Coarse lists (ivfpq)");
    index_build->add_option("--nprobe", ib.nprobe, "Default lists probed (ivfpq)");
    index_build->add_option("--m", ib.m, "Subquantizers (ivfpq)");
    index_build->add_option("--nbits", ib.nbits, "Bits per code (4 or 8)")->check(CLI::IsMember({4, 8}));
    index_build->callback([&] { action = [&] { return run_index_build(ib, g); }; });

    // search
    SearchArgs sa;
    auto *search = app.add_subcommand("search", "Query a retriever config");
    search->add_option("--config", sa.config, "Retriever config JSON")->required()->check(CLI::ExistingFile);
    search->add_option("--query", sa.query, "Query text")->required();
    search->add_option("-k", sa.k, "Results to return (default: final_k)");
    search->add_flag("--no-cache", sa.no_cache, "Bypass the query cache");
    search->add_option("--cache-dir", sa.cache_dir, "Cache directory (default: config, then $FLEXKIT_CACHE_DIR)");
    search->callback([&] { action = [&] { return run_search(sa, g); }; });

    // web
    auto *web = app.add_subcommand("web", "Web retrieval");
    web->require_subcommand(1);
    WebFetchArgs wf;
    auto *web_fetch = web->add_subcommand("fetch", "Seek, download and read pages");
    web_fetch->add_option("--query", wf.query, "Query")->required();
    web_fetch->add_option("-k", wf.k, "Pages to fetch")->check(CLI::PositiveNumber);
    web_fetch->add_option("--seeker", wf.seeker, "Fixture map or API seeker JSON")->required()->check(CLI::ExistingFile);
    web_fetch->add_option("--out", wf.out, "Output JSONL");
    web_fetch->add_flag("--no-robots", wf.no_robots, "Ignore robots.txt");
    web_fetch->add_option("--rate", wf.rate, "Requests per second per host (0 = unlimited)");
    web_fetch->add_option("--timeout-ms", wf.timeout_ms, "Per-request timeout");
    web_fetch->add_option("--max-bytes", wf.max_bytes, "Body size cap");
    web_fetch->add_option("--concurrency", wf.concurrency, "Parallel downloads")->check(CLI::PositiveNumber);
    web_fetch->add_option("--attempts", wf.attempts, "Tries per page")->check(CLI::PositiveNumber);
    web_fetch->callback([&] { action = [&] { return run_web_fetch(wf, g); }; });

    // eval
    auto *eval = app.add_subcommand("eval", "Evaluation");
    eval->require_subcommand(1);
    EvalArgs er;
    auto *eval_ret = eval->add_subcommand("retrieval", "Succ, recall@k and MRR of a retriever on a QA dataset");
    eval_ret->add_option("--config", er.config, "Retriever config JSON")->required()->check(CLI::ExistingFile);
    eval_ret->add_option("--dataset", er.dataset, "QA JSONL")->required()->check(CLI::ExistingFile);
    eval_ret->add_option("-k", er.k, "Cutoff (default: final_k)");
    eval_ret->add_option("--report", er.report, "Report JSON");
    eval_ret->add_flag("--timing", er.timing, "Include elapsed time in the report");
    eval_ret->callback([&] { action = [&] { return run_eval_retrieval(er, g); }; });
    EvalArgs eg;
    auto *eval_gen = eval->add_subcommand("generation", "EM and F1 of predictions against a QA dataset");
    eval_gen->add_option("--pred", eg.predictions, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    eval_gen->add_option("--dataset", eg.dataset, "QA JSONL")->required()->check(CLI::ExistingFile);
    eval_gen->add_option("--report", eg.report, "Report JSON");
    eval_gen->callback([&] { action = [&] { return run_eval_generation(eg, g); }; });

    // bench
    BenchArgs ba;
    auto *bench = app.add_subcommand("bench", "Resource overhead of a retriever config");
    bench->add_option("--config", ba.config, "Retriever config JSON")->check(CLI::ExistingFile);
    bench->add_option("--queries", ba.queries, "Queries (JSONL or text)")->check(CLI::ExistingFile);
    bench->add_option("--batch-size", ba.batch_size, "Queries per batch")->check(CLI::PositiveNumber);
    bench->add_option("--report", ba.report, "Report JSON");
    bench->add_option("--tokenizer-parallelism", ba.tokenizer_parallelism, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    bench->add_option("--sample-ms", ba.sample_ms, "Memory sampling interval")->check(CLI::PositiveNumber);
    bench->add_option("-k", ba.k, "Results per query (default: final_k)");
    std::string cmp_a;
    std::string cmp_b;
    auto *bench_compare = bench->add_subcommand("compare", "Ratios a/b of two bench reports");
    bench_compare->add_option("a", cmp_a, "Report A")->required()->check(CLI::ExistingFile);
    bench_compare->add_option("b", cmp_b, "Report B")->required()->check(CLI::ExistingFile);
    bench_compare->callback([&] { action = [&] { return run_bench_compare(cmp_a, cmp_b, g); }; });
    bench->callback([&] {
        if (bench_compare->parsed()) {
            return;
        }
        if (ba.config.empty() || ba.queries.empty()) {
            throw CLI::RequiredError("bench needs --config and --queries");
        }
        action = [&] { return run_bench(ba, g); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    spdlog::set_level(spdlog::level::from_str(g.log_level));

    try {
        rc = action ? action() : kExitUsage;
    } catch (const CLI::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        spdlog::error("{}", e.what());
        return kExitRuntime;
    }
    return rc;
}
