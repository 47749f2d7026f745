// affrec command line: corpus ingestion and synthesis, evaluation runs and
// sweeps, one-shot recommendations, the static-vector compromise demo,
// cache statistics and the HTTP service.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "affrec/eval.hpp"
#include "affrec/io.hpp"
#include "affrec/ranking.hpp"
#include "affrec/service.hpp"
#include "affrec/synth.hpp"

namespace {

using namespace affrec;

struct CorpusArgs {
    std::string data_dir;
    bool use_synth = false;
    SynthConfig synth;
};

void add_corpus_options(CLI::App* cmd, CorpusArgs& args) {
    auto* data = cmd->add_option("--data", args.data_dir, "corpus directory (JSONL files)");
    auto* synth = cmd->add_flag("--synth", args.use_synth, "use a generated synthetic corpus");
    cmd->add_option("--seed", args.synth.seed, "synthetic corpus seed");
    cmd->add_option("--users", args.synth.n_users, "synthetic user count");
    cmd->add_option("--pois", args.synth.n_pois, "synthetic poi count");
    cmd->add_option("--checkins", args.synth.n_checkins, "synthetic check-in count");
    data->excludes(synth);
}

std::pair<Corpus, std::optional<GroundTruth>> resolve_corpus(const CorpusArgs& args) {
    if (args.use_synth) {
        auto synth = generate_synthetic_corpus(args.synth);
        return {std::move(synth.corpus), std::move(synth.truth)};
    }
    if (args.data_dir.empty())
        throw ValidationError("either --data <dir> or --synth is required");
    return {load_corpus(args.data_dir), std::nullopt};
}

int run_synth(const SynthConfig& cfg, const std::string& out_dir) {
    const auto synth = generate_synthetic_corpus(cfg);
    write_synthetic_corpus(out_dir, synth);
    json summary;
    summary["out"] = out_dir;
    summary["users"] = cfg.n_users;
    summary["pois"] = cfg.n_pois;
    summary["checkins"] = synth.corpus.checkins.size();
    summary["seed"] = cfg.seed;
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_ingest(const std::string& dir) {
    const Corpus corpus = load_corpus(dir);
    size_t review_count = 0;
    for (const auto& [id, poi] : corpus.pois) review_count += poi.content.reviews.size();
    std::set<std::string> users;
    for (const auto& c : corpus.checkins) users.insert(c.user_id);
    json summary;
    summary["pois"] = corpus.pois.size();
    summary["users"] = users.size();
    summary["checkins"] = corpus.checkins.size();
    summary["reviews"] = review_count;
    try {
        const auto filtered = ten_core_filter(corpus.checkins);
        std::set<std::string> fu, fp;
        for (const auto& c : filtered) {
            fu.insert(c.user_id);
            fp.insert(c.poi_id);
        }
        summary["after_10core"] = {
            {"checkins", filtered.size()}, {"users", fu.size()}, {"pois", fp.size()}};
    } catch (const EmptyAfterFilterError&) {
        summary["after_10core"] = nullptr;
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int run_eval_cmd(const CorpusArgs& corpus_args, const std::string& split,
                 const std::string& ablation, double alpha, bool baseline, bool grid,
                 std::uint64_t split_seed) {
    auto [corpus, truth] = resolve_corpus(corpus_args);
    EvalOptions opt;
    opt.split = split_kind_from_string(split);
    opt.flags = AblationFlags::parse(ablation);
    opt.alpha = alpha;
    opt.seed = split_seed;
    opt.with_baseline = baseline;
    if (baseline && !truth)
        throw ValidationError("--baseline requires --synth (planted ground truth)");
    const GroundTruth* gt = truth ? &*truth : nullptr;
    if (grid) {
        // one row per single-flag ablation plus the full pipeline
        std::vector<EvalReport> reports;
        for (const char* flags : {"", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A11"}) {
            opt.flags = AblationFlags::parse(flags);
            reports.push_back(run_eval(corpus, gt, opt));
        }
        std::cerr << report_table(reports);
        std::cout << ablation_grid_csv(reports);
        return 0;
    }
    const auto report = run_eval(corpus, gt, opt);
    std::cerr << report_table({report});
    std::cout << report.to_json().dump(2) << "\n";
    return 0;
}

int run_sweep_alpha(const CorpusArgs& corpus_args, const std::string& split,
                    std::uint64_t split_seed) {
    auto [corpus, truth] = resolve_corpus(corpus_args);
    EvalOptions opt;
    opt.split = split_kind_from_string(split);
    opt.seed = split_seed;
    const auto reports = sweep_alpha(corpus, truth ? &*truth : nullptr, opt);
    std::cout << alpha_sweep_csv(reports);
    return 0;
}

int run_recommend(const std::string& data_dir, const std::string& user,
                  const std::string& context_json, size_t n) {
    Corpus corpus = load_corpus(data_dir);
    ServiceConfig cfg;
    cfg.data_dir = data_dir;
    Engine engine(std::move(corpus), cfg);
    const Context context = context_from_json(json::parse(context_json));
    const auto out = engine.recommend(user, context, std::nullopt, n);
    json ranked = json::array();
    for (const auto& item : out.ranked) {
        ranked.push_back({{"poi_id", item.poi_id},
                          {"score", item.score},
                          {"explanation", item.explanation}});
    }
    json reply;
    reply["ranked"] = std::move(ranked);
    reply["timing"] = {{"cache_hits", out.cache_hits},
                       {"misses", out.cache_misses},
                       {"scoring_us", out.scoring_us}};
    std::cout << reply.dump(2) << "\n";
    return 0;
}

int run_demo_impossibility(int dim) {
    const auto report = demonstrate_impossibility(dim);
    json j;
    j["d"] = report.dim;
    j["shortfall"] = report.per_context_shortfall;
    j["loss"] = report.compromise_loss;
    std::cout << j.dump(2) << "\n";
    std::printf("compromise loss at d=%d: %.10f (per-context score %.10f)\n", report.dim,
                report.compromise_loss, report.per_context_score);
    return 0;
}

int run_cache_stats(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ValidationError("cache-stats: url must include a scheme");
    httplib::Client client(url);
    auto res = client.Get("/metrics");
    if (!res) throw Error("cache-stats: service unreachable at " + url);
    if (res->status != 200)
        throw Error("cache-stats: /metrics returned status " + std::to_string(res->status));
    std::cout << res->body << "\n";
    return 0;
}

int run_serve(const std::string& config_file, ServiceConfig overrides,
              const std::vector<std::string>& set_flags) {
    ServiceConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    cfg.load_env();
    for (const auto& kv : set_flags) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ValidationError("--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!overrides.data_dir.empty()) cfg.data_dir = overrides.data_dir;
    if (overrides.listen_addr != ServiceConfig{}.listen_addr)
        cfg.listen_addr = overrides.listen_addr;
    cfg.validate();
    if (cfg.data_dir.empty()) throw ValidationError("serve: data_dir is required");

    Corpus corpus = load_corpus(cfg.data_dir);
    std::shared_ptr<ReasonerBackend> backend;
    if (cfg.backend == BackendKind::remote) {
        RemoteBackendConfig remote_cfg{cfg.remote_url, cfg.remote_timeout_ms};
        // a prompts/answer.txt next to the corpus overrides the built-in
        // reasoning prompt
        const auto prompt_path =
            std::filesystem::path(cfg.data_dir) / "prompts" / "answer.txt";
        if (std::filesystem::exists(prompt_path)) {
            std::ifstream in(prompt_path);
            std::ostringstream buffer;
            buffer << in.rdbuf();
            remote_cfg.answer_prompt_template = buffer.str();
        }
        backend = std::make_shared<RemoteBackend>(std::move(remote_cfg));
    }
    Engine engine(std::move(corpus), cfg, backend);
    HttpService service(engine);
    const auto [host, port] = cfg.listen_host_port();
    if (!service.bind(host, port))
        throw Error("serve: cannot bind " + cfg.listen_addr);
    std::fprintf(stderr, "listening on %s\n", cfg.listen_addr.c_str());
    service.listen_blocking();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"context-conditioned affordance recommender"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    SynthConfig synth_cfg;
    std::string synth_out = "synth_corpus";
    synth_cmd->add_option("--seed", synth_cfg.seed, "generator seed");
    synth_cmd->add_option("--users", synth_cfg.n_users, "user count");
    synth_cmd->add_option("--pois", synth_cfg.n_pois, "poi count");
    synth_cmd->add_option("--checkins", synth_cfg.n_checkins, "check-in count");
    synth_cmd->add_option("--out", synth_out, "output directory");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "validate and summarize a corpus directory");
    std::string ingest_dir;
    ingest_cmd->add_option("dir", ingest_dir, "corpus directory")->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run an evaluation configuration");
    CorpusArgs eval_corpus;
    add_corpus_options(eval_cmd, eval_corpus);
    std::string eval_split = "standard";
    std::string eval_ablation;
    double eval_alpha = 0.5;
    bool eval_baseline = false;
    std::uint64_t eval_seed = 1;
    bool eval_grid = false;
    eval_cmd->add_option("--split", eval_split, "standard | cold-start | context-shift");
    eval_cmd->add_option("--ablation", eval_ablation, "comma-separated flags, e.g. A1,A3");
    eval_cmd->add_option("--alpha", eval_alpha, "uncertainty down-weight");
    eval_cmd->add_flag("--baseline", eval_baseline, "also score the static bilinear baseline");
    eval_cmd->add_flag("--grid", eval_grid, "run every single-flag ablation, emit the grid CSV");
    eval_cmd->add_option("--split-seed", eval_seed, "cold-start mask seed");

    // sweep-alpha
    auto* sweep_cmd = app.add_subcommand("sweep-alpha", "alpha sensitivity sweep (CSV)");
    CorpusArgs sweep_corpus;
    add_corpus_options(sweep_cmd, sweep_corpus);
    std::string sweep_split = "standard";
    std::uint64_t sweep_seed = 1;
    sweep_cmd->add_option("--split", sweep_split, "standard | cold-start | context-shift");
    sweep_cmd->add_option("--split-seed", sweep_seed, "cold-start mask seed");

    // recommend
    auto* rec_cmd = app.add_subcommand("recommend", "one-shot recommendation");
    std::string rec_data, rec_user, rec_context;
    size_t rec_n = 10;
    rec_cmd->add_option("--data", rec_data, "corpus directory")->required();
    rec_cmd->add_option("--user", rec_user, "user id")->required();
    rec_cmd->add_option("--context-json", rec_context, "context as JSON")->required();
    rec_cmd->add_option("--n", rec_n, "list length");

    // demo-impossibility
    auto* demo_cmd = app.add_subcommand("demo-impossibility",
                                        "static-vector compromise under two contexts");
    int demo_dim = 2;
    demo_cmd->add_option("--dim", demo_dim, "embedding dimension");

    // cache-stats
    auto* stats_cmd = app.add_subcommand("cache-stats", "fetch /metrics from a running service");
    std::string stats_url = "http://127.0.0.1:8080";
    stats_cmd->add_option("--url", stats_url, "service base url");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    std::string serve_config;
    ServiceConfig serve_overrides;
    std::vector<std::string> serve_sets;
    serve_cmd->add_option("--config", serve_config, "flat key=value config file");
    serve_cmd->add_option("--data", serve_overrides.data_dir, "corpus directory");
    serve_cmd->add_option("--listen", serve_overrides.listen_addr, "host:port");
    serve_cmd->add_option("--set", serve_sets, "override any config key (key=value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth_cmd) return run_synth(synth_cfg, synth_out);
        if (*ingest_cmd) return run_ingest(ingest_dir);
        if (*eval_cmd)
            return run_eval_cmd(eval_corpus, eval_split, eval_ablation, eval_alpha,
                                eval_baseline, eval_grid, eval_seed);
        if (*sweep_cmd) return run_sweep_alpha(sweep_corpus, sweep_split, sweep_seed);
        if (*rec_cmd) return run_recommend(rec_data, rec_user, rec_context, rec_n);
        if (*demo_cmd) return run_demo_impossibility(demo_dim);
        if (*stats_cmd) return run_cache_stats(stats_url);
        if (*serve_cmd) return run_serve(serve_config, serve_overrides, serve_sets);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
