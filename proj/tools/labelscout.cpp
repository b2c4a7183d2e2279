#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "labelscout/error.hpp"
#include "labelscout/pipeline.hpp"
#include "labelscout/review_server.hpp"
#include "labelscout/synthetic.hpp"

namespace fs = std::filesystem;
using namespace labelscout;

namespace {

struct Options {
    std::string config;
    bool quiet = false;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> subset_size;
    std::string labels;
    std::optional<std::size_t> max_ranks;
    std::string predictions;
    std::string format = "table";
    std::optional<std::size_t> sample;
    std::string host;
    std::optional<int> port;
    std::string out;
    std::size_t documents = 200;
    std::uint64_t synth_seed = 11;
};

Pipeline open(const Options& o) {
    return Pipeline(RunConfig::load(o.config), o.quiet ? nullptr : &std::cerr);
}

int serve(const Options& o) {
    const RunConfig config = RunConfig::load(o.config);
    Pipeline pipeline(config, nullptr);
    const fs::path space = o.labels.empty() ? pipeline.current_space_path() : fs::path(o.labels);
    ReviewOptions ro;
    ro.host = o.host.empty() ? config.review.host : o.host;
    ro.port = o.port.value_or(config.review.port);
    ro.static_dir = config.review.static_dir;
    if (!config.review.token_env.empty()) {
        const char* token = std::getenv(config.review.token_env.c_str());
        if (!token || !*token) throw ConfigError("environment variable " + config.review.token_env + " is not set");
        ro.token = token;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ReviewServer server(space, ro);
    const int port = server.start();
    std::cout << "serving " << space.string() << " on http://" << ro.host << ":" << port << std::endl;
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    return 0;
}

int synth(const Options& o) {
    SyntheticOptions so;
    so.documents = o.documents;
    so.seed = o.synth_seed;
    const auto data = generate_synthetic(so);
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_jsonl(data.corpus, dir / "corpus.jsonl");
    write_file_atomic(dir / "config.json", synthetic_config("corpus.jsonl", "run", so).dump(2) + "\n");
    std::string planted;
    for (const auto& p : data.planted()) planted += p + "\n";
    write_file_atomic(dir / "planted.txt", planted);
    std::cout << "wrote " << (dir / "corpus.jsonl").string() << " (" << data.corpus.size() << " documents, "
              << data.head.size() << " head + " << data.longtail.size() << " long-tail labels)\n";
    return 0;
}

int templates(const Options& o) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    const auto d = PromptSet::defaults();
    const std::pair<const char*, const PromptTemplate*> files[] = {{"keyphrase", &d.keyphrase},
                                                                   {"synthesis", &d.synthesis},
                                                                   {"dedup_judge", &d.dedup_judge},
                                                                   {"match_judge", &d.match_judge},
                                                                   {"dominance", &d.dominance}};
    for (const auto& [name, t] : files) write_file_atomic(dir / (std::string(name) + ".txt"), format_template_file(*t));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-world multi-label classification pipeline"};
    app.require_subcommand(1);
    Options o;

    auto with_config = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", o.config, "Run config file (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_flag("-q,--quiet", o.quiet, "No progress output");
        return cmd;
    };

    auto* ingest = with_config(app.add_subcommand("ingest", "Read and validate the corpus"));
    auto* discover = with_config(app.add_subcommand("discover", "Build the initial label space"));
    auto* refine = with_config(app.add_subcommand("refine", "Iteratively refine the label space"));
    refine->add_option("--iterations", o.iterations, "Number of iterations");
    refine->add_option("--subset-size", o.subset_size, "Low-confidence instances per iteration");
    auto* classify = with_config(app.add_subcommand("classify", "Assign labels to every document"));
    classify->add_option("--labels", o.labels, "Label space file (default: run space)");
    classify->add_option("--max-ranks", o.max_ranks, "Labels per document");
    auto* evaluate = with_config(app.add_subcommand("evaluate", "Coverage and P@k against gold labels"));
    evaluate->add_option("--predictions", o.predictions, "Predictions file (default: run predictions)");
    evaluate->add_option("--labels", o.labels, "Label space file (default: run space)");
    evaluate->add_option("--format", o.format, "table or json")->check(CLI::IsMember({"table", "json"}));
    auto* probe = with_config(app.add_subcommand("probe-dominance", "Estimate how many documents have a dominant label"));
    probe->add_option("--sample", o.sample, "Documents to sample");
    auto* serve_cmd = with_config(app.add_subcommand("serve", "Serve the review API"));
    serve_cmd->add_option("--labels", o.labels, "Label space file (default: run space)");
    serve_cmd->add_option("--host", o.host, "Bind address");
    serve_cmd->add_option("--port", o.port, "Port (0 picks one)");
    auto* run = with_config(app.add_subcommand("run", "ingest, discover, refine, classify, evaluate"));
    auto* exp = with_config(app.add_subcommand("export", "Print live label names"));
    exp->add_option("--labels", o.labels, "Label space file (default: run space)");
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic planted-label corpus and config");
    synth_cmd->add_option("-o,--out", o.out, "Output directory")->required();
    synth_cmd->add_option("--documents", o.documents, "Number of documents");
    synth_cmd->add_option("--seed", o.synth_seed, "Layout seed");
    auto* templates_cmd = app.add_subcommand("templates", "Write the built-in prompt templates as editable files");
    templates_cmd->add_option("-o,--out", o.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_code_for(ErrorKind::config);
    }

    try {
        if (ingest->parsed()) {
            const auto corpus = open(o).ingest();
            std::cout << corpus.size() << " documents\n";
        } else if (discover->parsed()) {
            const auto space = open(o).discover();
            std::cout << space.export_names();
        } else if (refine->parsed()) {
            const auto records = open(o).refine(o.iterations, o.subset_size);
            for (const auto& r : records) std::cout << to_json(r).dump() << '\n';
        } else if (classify->parsed()) {
            const auto predictions = open(o).classify(o.labels, o.max_ranks);
            std::cout << predictions.size() << " documents classified\n";
        } else if (evaluate->parsed()) {
            const auto report = open(o).evaluate(o.predictions, o.labels);
            std::cout << (o.format == "json" ? to_json(report).dump(2) + "\n" : format_table(report));
        } else if (probe->parsed()) {
            const auto r = open(o).probe(o.sample);
            std::printf("%zu of %zu sampled documents have a dominant label (%.1f%%)\n", r.dominant, r.sampled,
                        100.0 * r.percent_dominant);
        } else if (serve_cmd->parsed()) {
            return serve(o);
        } else if (run->parsed()) {
            auto pipeline = open(o);
            pipeline.run();
            if (fs::exists(pipeline.path(artifacts::report))) std::cout << read_file(pipeline.path(artifacts::report));
        } else if (exp->parsed()) {
            auto pipeline = open(o);
            std::cout << LabelSpace::load(o.labels.empty() ? pipeline.current_space_path() : fs::path(o.labels))
                             .export_names();
        } else if (synth_cmd->parsed()) {
            return synth(o);
        } else if (templates_cmd->parsed()) {
            return templates(o);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
