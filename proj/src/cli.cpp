#include "cascade/cli.hpp"

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cascade/config.hpp"
#include "cascade/format.hpp"
#include "cascade/regret_lab.hpp"
#include "cascade/stream_io.hpp"
#include "cascade/synthetic.hpp"

namespace cascade {

namespace {

struct RunArgs {
    std::string config;
    std::string stream;
    std::string out;
    std::string summary;
    std::optional<std::uint64_t> seed;
    std::string mode;
    std::string reorder = "none";
};

struct RegretArgs {
    std::string loss = "quadratic";
    std::uint64_t horizon = 10000;
    std::vector<std::uint64_t> checkpoints = {100, 1000, 10000};
    std::vector<double> weights = {0.5, 0.5};
    double radius = 1.0;
    std::uint64_t seed = 7;
    std::string out;
};

struct ReorderArgs {
    std::string stream;
    std::string out;
    std::string reorder;
    std::uint64_t seed = 0;
};

struct SynthArgs {
    SyntheticConfig config;
    std::string out;
};

std::ofstream open_output(const std::string& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot write '" + path + "'");
    return f;
}

int do_run(const RunArgs& a, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = load_config(a.config);
    if (a.seed) cfg.engine.seed = *a.seed;
    if (!a.mode.empty()) cfg.engine.mode = parse_engine_mode(a.mode);

    auto records = load_stream(a.stream);
    records = apply_reorder(std::move(records), ReorderSpec::parse(a.reorder), cfg.engine.seed, err);
    if (!cfg.labels_from_file) {
        auto names = stream_labels(records);
        if (names.size() < 2)
            throw ConfigError("config has no 'labels' key and the stream carries fewer than two distinct labels");
        cfg.engine.labels = LabelSet(std::move(names));
    }

    CascadeEngine engine(cfg.engine, make_expert(cfg.expert, cfg.engine.labels));
    auto metrics = open_output(a.out);
    MetricsCsvWriter writer(metrics, engine.config().labels);
    const RunSummary summary = engine.run_stream(records, &writer);
    metrics.close();
    if (!metrics) throw ParseError("failed writing '" + a.out + "'");

    const std::string summary_path = a.summary.empty() ? a.out + ".summary.json" : a.summary;
    auto sf = open_output(summary_path);
    sf << summary_json(summary, engine.config());

    out << "episodes " << summary.episodes << ", expert calls " << summary.expert_calls;
    if (summary.accuracy) out << ", accuracy " << format_fixed(*summary.accuracy, 4);
    out << ", total J " << format_double(summary.total_J) << '\n';
    return 0;
}

int do_regret(const RegretArgs& a, std::ostream& out)
{
    using namespace regret;
    require(a.weights.size() >= 1, "need at least one ensemble weight");
    const Domain<double> domain = Ball<double>{VectorX<double>::Zero(2), a.radius};

    std::unique_ptr<ConvexLossStream<double>> stream;
    if (a.loss == "quadratic") {
        VectorX<double> optimum(2);
        optimum << 0.3 * a.radius, -0.2 * a.radius;
        stream = std::make_unique<QuadraticLossStream<double>>(domain, optimum, 0.5 * a.radius, a.horizon, a.seed);
    } else if (a.loss == "linear") {
        VectorX<double> g(2);
        g << 1.0, 0.0;
        stream = std::make_unique<AlternatingLinearStream<double>>(domain, g, a.horizon);
    } else if (a.loss == "absdev") {
        stream = std::make_unique<AbsoluteDeviationStream<double>>(domain, a.horizon, 0.5 * a.radius, a.seed);
    } else {
        throw ConfigError("unknown loss '" + a.loss + "' (expected quadratic, linear or absdev)");
    }

    EnsemblePolicy<double> ensemble;
    ensemble.weights = a.weights;
    Rng rng(a.seed + 1);
    for (std::size_t i = 0; i < a.weights.size(); ++i) {
        VectorX<double> start(2);
        start << uniform(rng, -a.radius, a.radius), uniform(rng, -a.radius, a.radius);
        ensemble.initial.push_back(project(domain, start));
    }

    std::vector<std::uint64_t> marks;
    for (auto c : a.checkpoints)
        if (c >= 1 && c <= a.horizon) marks.push_back(c);
    const auto result = ensemble_regret(*stream, ensemble, a.horizon, std::span<const std::uint64_t>(marks));

    if (a.out.empty()) {
        write_regret_csv(out, result.checkpoints);
    } else {
        auto f = open_output(a.out);
        write_regret_csv(f, result.checkpoints);
    }
    return 0;
}

int do_reorder(const ReorderArgs& a, std::ostream& err)
{
    auto records = load_stream(a.stream);
    records = apply_reorder(std::move(records), ReorderSpec::parse(a.reorder), a.seed, err);
    save_stream(a.out, records);
    return 0;
}

int do_synth(const SynthArgs& a)
{
    const auto records = generate_synthetic(a.config);
    save_stream(a.out, records);
    return 0;
}

// Equilibrium values span many orders of magnitude; print them as d.ddde15.
std::string format_scientific(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific);
    std::string s(buf, res.ptr);
    if (const auto plus = s.find("e+"); plus != std::string::npos) s.erase(plus + 1, 1);
    return s;
}

} // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Text classifier cascade that learns from an expert as records arrive"};
    app.name("cascade");
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Process a stream through the cascade");
    run->add_option("--config", run_args.config, "Config file")->required();
    run->add_option("--stream", run_args.stream, "Input stream (JSON lines)")->required();
    run->add_option("--out", run_args.out, "Metrics CSV to write")->required();
    run->add_option("--summary", run_args.summary, "Summary JSON (default: <out>.summary.json)");
    run->add_option("--seed", run_args.seed, "Override the config seed");
    run->add_option("--mode", run_args.mode, "learning or inference");
    run->add_option("--reorder", run_args.reorder, "none, length, category:<name> or shuffle");

    RegretArgs regret_args;
    auto* reg = app.add_subcommand("regret", "Measure ensemble regret of projected OGD");
    reg->add_option("--loss", regret_args.loss, "quadratic, linear or absdev");
    reg->add_option("--T", regret_args.horizon, "Horizon");
    reg->add_option("--checkpoints", regret_args.checkpoints, "Rounds at which regret is reported")->delimiter(',');
    reg->add_option("--weights", regret_args.weights, "Ensemble weights")->delimiter(',');
    reg->add_option("--radius", regret_args.radius, "Radius of the ball domain");
    reg->add_option("--seed", regret_args.seed, "Seed");
    reg->add_option("--out", regret_args.out, "CSV file (default: stdout)");

    double eq_C = 0.0, eq_x = 0.0;
    auto* eq = app.add_subcommand("equilibrium", "Aggregate small-model cost matching the expert's cost");
    eq->add_option("--C", eq_C, "Expert cost")->required();
    eq->add_option("--x", eq_x, "Fraction handled by the small models")->required();

    ReorderArgs reorder_args;
    auto* ro = app.add_subcommand("reorder", "Write a reordered copy of a stream");
    ro->add_option("--stream", reorder_args.stream, "Input stream")->required();
    ro->add_option("--out", reorder_args.out, "Output stream")->required();
    ro->add_option("--reorder", reorder_args.reorder, "none, length, category:<name> or shuffle")->required();
    ro->add_option("--seed", reorder_args.seed, "Shuffle seed");

    SynthArgs synth_args;
    auto* sy = app.add_subcommand("synth", "Generate a synthetic two-class stream");
    sy->add_option("--records", synth_args.config.records, "Number of records");
    sy->add_option("--seed", synth_args.config.seed, "Seed");
    sy->add_option("--vocabulary", synth_args.config.vocabulary, "Word axis size");
    sy->add_option("--out", synth_args.out, "Output stream")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*run) return do_run(run_args, out, err);
        if (*reg) return do_regret(regret_args, out);
        if (*eq) {
            out << format_scientific(regret::cost_equilibrium(eq_C, eq_x)) << '\n';
            return 0;
        }
        if (*ro) return do_reorder(reorder_args, err);
        if (*sy) return do_synth(synth_args);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace cascade
