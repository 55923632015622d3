#include "seqnas/cli.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>

#include "seqnas/benchdata.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/synthbench.hpp"

namespace seqnas {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// configuration

RunConfig parse_run_config(const json& doc)
{
    if (!doc.is_object())
        throw ConfigError("run config must be a JSON object");
    static const std::set<std::string> keys{"search", "space", "preset", "predictor", "evaluator"};
    for (const auto& [key, _] : doc.items())
        if (!keys.count(key))
            throw ConfigError("unknown run config key '" + key + "'");
    if (doc.contains("space") && doc.contains("preset"))
        throw ConfigError("give either 'space' or 'preset', not both");

    RunConfig rc;
    try {
        if (auto it = doc.find("search"); it != doc.end())
            rc.search = it->get<SearchConfig>();
        if (auto it = doc.find("preset"); it != doc.end())
            rc.space = preset_space(it->get<std::string>());
        if (auto it = doc.find("space"); it != doc.end())
            rc.space = it->get<SearchSpaceConfig>();
        if (auto it = doc.find("predictor"); it != doc.end())
            rc.predictor = it->get<PredictorConfig>();
        if (auto it = doc.find("evaluator"); it != doc.end())
            rc.evaluator = *it;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed run config: ") + e.what());
    }
    rc.space = validate_config(rc.space);
    validate_search_config(rc.search);
    validate_predictor_config(rc.predictor);
    if (!rc.evaluator.is_object() || !rc.evaluator.contains("kind"))
        throw ConfigError("evaluator section needs a 'kind'");
    return rc;
}

std::unique_ptr<Evaluator> make_evaluator(const json& d, const SearchSpaceConfig& space)
{
    try {
        const auto kind = d.at("kind").get<std::string>();
        if (kind == "synthetic") {
            SyntheticBenchConfig cfg;
            cfg.bench_seed = d.value("bench_seed", cfg.bench_seed);
            cfg.noise_std = d.value("noise_std", cfg.noise_std);
            cfg.prediction_rows = d.value("prediction_rows", cfg.prediction_rows);
            cfg.prediction_cols = d.value("prediction_cols", cfg.prediction_cols);
            return std::make_unique<SyntheticEvaluator>(cfg, space);
        }
        if (kind == "bench") {
            const auto records = import_bench(d.at("path").get<std::string>(), ImportFormat::bench_jsonl, space);
            auto table = lookup_table(records, space, d.value("dataset", std::string{}));
            if (table.empty())
                throw ConfigError("bench table is empty for the requested dataset");
            return std::make_unique<BenchLookupEvaluator>(std::move(table));
        }
        if (kind == "external") {
            ExternalConfig cfg;
            cfg.endpoint = ExternalEndpoint::parse(d.at("endpoint").get<std::string>());
            cfg.timeout_seconds = d.value("timeout", cfg.timeout_seconds);
            cfg.transport_retries = d.value("transport_retries", cfg.transport_retries);
            return std::make_unique<ExternalEvaluator>(cfg);
        }
        throw ConfigError("unknown evaluator kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed evaluator section: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// command line

namespace {

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_stream(std::istream& in)
{
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string read_text_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw ConfigError("cannot read " + p.string());
    return read_stream(in);
}

json parse_json_text(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(what + " is not valid JSON: " + e.what());
    }
}

// A spec given inline, as a file, or on stdin ("-" or empty). Lines printed
// by `sample` ({"arch_id": ..., "spec": ...}) are accepted as well.
ArchitectureSpec read_spec_input(const std::string& input)
{
    std::string text;
    if (input.empty() || input == "-")
        text = read_stream(std::cin);
    else if (input.front() == '{')
        text = input;
    else
        text = read_text_file(input);
    json doc = parse_json_text(text, "architecture spec");
    if (doc.is_object() && doc.contains("spec") && !doc.contains("stem"))
        doc = doc["spec"];
    try {
        return doc.get<ArchitectureSpec>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed architecture spec: ") + e.what());
    }
}

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config;
    std::string state_dir;
    std::string out;
    bool dry_run = false;
};

struct SpaceFlags {
    std::string preset;
    std::string space_file;
};

void add_space_flags(CLI::App* cmd, SpaceFlags& f)
{
    cmd->add_option("--preset", f.preset, "Search-space preset")->check(CLI::IsMember({"default", "paper"}));
    cmd->add_option("--space", f.space_file, "Search-space config JSON file");
}

class Cli {
public:
    Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(const std::vector<std::string>& args);

private:
    void emit(const std::string& text)
    {
        if (g_.out.empty()) {
            out_ << text;
            return;
        }
        std::ofstream f(g_.out, std::ios::binary | std::ios::trunc);
        if (!f)
            throw ConfigError("cannot write " + g_.out);
        f << text;
    }

    std::uint64_t seed() const { return g_.seed.value_or(0); }

    std::optional<RunConfig> run_config() const
    {
        if (g_.config.empty())
            return std::nullopt;
        return parse_run_config(parse_json_text(read_text_file(g_.config), g_.config));
    }

    SearchSpaceConfig space(const SpaceFlags& f) const
    {
        if (!f.space_file.empty())
            return validate_config(parse_json_text(read_text_file(f.space_file), f.space_file).get<SearchSpaceConfig>());
        if (!f.preset.empty())
            return preset_space(f.preset);
        if (auto rc = run_config())
            return rc->space;
        return default_space();
    }

    std::string state_dir(bool required) const
    {
        if (!g_.state_dir.empty())
            return g_.state_dir;
        if (const char* env = std::getenv("SEQNAS_STATE_DIR"); env && *env)
            return env;
        if (required)
            throw ConfigError("no state directory: pass --state-dir or set SEQNAS_STATE_DIR");
        return {};
    }

    RunOptions run_options(const json& evaluator) const
    {
        RunOptions opts;
        opts.evaluator_description = evaluator;
        opts.log = [this](const std::string& m) { err_ << m << '\n'; };
        return opts;
    }

    std::string summary(const SearchState& st) const
    {
        json j{{"records", st.records.size()},
               {"planned", st.planned_records()},
               {"complete", st.complete},
               {"iteration", st.iteration}};
        if (!st.records.empty()) {
            const auto& b = st.best();
            j["best"] = {{"arch_id", b.arch_id.str()}, {"score", b.score}, {"spec", b.spec}};
        }
        return j.dump() + "\n";
    }

    std::string plan_document(const char* kind, const RunConfig& rc, const std::string& dir, std::size_t planned) const
    {
        json j{{"kind", kind},
               {"search", rc.search},
               {"space", rc.space},
               {"predictor", rc.predictor},
               {"evaluator", rc.evaluator},
               {"planned_records", planned},
               {"space_cardinality", cardinality(rc.space)},
               {"state_dir", dir.empty() ? json(nullptr) : json(dir)}};
        return j.dump(2) + "\n";
    }

    std::vector<BenchRecord> filtered(const std::vector<BenchRecord>& in) const
    {
        std::vector<BenchRecord> out;
        for (const auto& r : in)
            if ((dataset_.empty() || r.dataset == dataset_) &&
                (method_.empty() || r.method == parse_bench_method(method_)))
                out.push_back(r);
        return out;
    }

    void cmd_sample(const SpaceFlags& sf);
    void cmd_encode(const SpaceFlags& sf);
    void cmd_decode(const SpaceFlags& sf);
    void cmd_cardinality(const SpaceFlags& sf);
    int cmd_validate(const SpaceFlags& sf);
    void cmd_search(bool random);
    void cmd_resume();
    void cmd_report();
    void cmd_bench_import(const SpaceFlags& sf);
    void cmd_bench_export();
    void cmd_bench_histogram();
    void cmd_bench_to_surrogate(const SpaceFlags& sf);
    void cmd_synthbench(const SpaceFlags& sf);

    std::ostream& out_;
    std::ostream& err_;
    Globals g_;

    // Subcommand arguments.
    std::size_t count_ = 1;
    std::string mode_ = "per-factor";
    std::string input_;
    bool layout_ = false;
    bool encoder_only_ = false;
    int budget_ = 0;
    bool kd_ = false;
    std::string curve_ = "top3";
    std::size_t k_ = 3;
    std::string format_ = "jsonl";
    std::string dataset_;
    std::string method_;
    std::size_t bins_ = 10;
    double noise_ = 0.01;
};

void Cli::cmd_sample(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    Rng rng(seed());
    std::string text;
    for (std::size_t i = 0; i < count_; ++i) {
        const auto spec = sample_architecture(sp, rng, parse_sampling_mode(mode_));
        text += json{{"arch_id", canonical_id(spec).str()}, {"spec", spec}}.dump() + "\n";
    }
    emit(text);
}

void Cli::cmd_encode(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    if (layout_) {
        std::string text;
        const auto layout = feature_layout(sp);
        for (std::size_t i = 0; i < layout.size(); ++i)
            text += std::to_string(i) + "," + layout.slots[i].name + "\n";
        emit(text);
        return;
    }
    emit(encode(read_spec_input(input_), sp).to_bit_string() + "\n");
}

void Cli::cmd_decode(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    std::string bits = input_;
    if (bits.empty() || bits == "-") {
        bits = read_stream(std::cin);
        while (!bits.empty() && std::isspace(static_cast<unsigned char>(bits.back())))
            bits.pop_back();
    }
    FeatureVector v;
    try {
        v = FeatureVector::from_bit_string(bits, feature_layout(sp).fingerprint);
    } catch (const std::invalid_argument& e) {
        throw DecodeError(e.what());
    }
    emit(canonical_json(decode(v, sp)) + "\n");
}

void Cli::cmd_cardinality(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    emit(std::to_string(encoder_only_ ? encoder_cardinality(sp) : cardinality(sp)) + "\n");
}

int Cli::cmd_validate(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    if (input_.empty()) {
        emit("ok\n");
        return 0;
    }
    const ArchitectureSpec spec = read_spec_input(input_);
    const auto violations = validate_spec(spec, sp);
    if (violations.empty()) {
        emit("valid\n");
        return 0;
    }
    std::string text_out;
    for (const auto& v : violations)
        text_out += v + "\n";
    emit(text_out);
    throw ValidationError(std::to_string(violations.size()) + " violation(s): " + violations.front());
}

void Cli::cmd_search(bool random)
{
    if (g_.config.empty())
        throw ConfigError("--config is required");
    RunConfig rc = *run_config();
    if (g_.seed)
        rc.search.seed = *g_.seed;
    const std::string dir = state_dir(false);
    if (random && budget_ <= 0)
        throw ConfigError("--budget must be positive");
    const std::size_t planned =
        random ? static_cast<std::size_t>(budget_)
               : static_cast<std::size_t>(rc.search.n_init) +
                     static_cast<std::size_t>(rc.search.m_iterations) * static_cast<std::size_t>(rc.search.l_candidates);

    auto evaluator = make_evaluator(rc.evaluator, rc.space);
    if (g_.dry_run) {
        emit(plan_document(random ? "random_search" : "search", rc, dir, planned));
        return;
    }
    RunOptions opts = run_options(rc.evaluator);
    if (!dir.empty())
        opts.state_dir = dir;
    const SearchState st = random ? run_random_search(budget_, kd_, rc.search, rc.space, *evaluator, opts)
                                  : run_search(rc.search, rc.space, rc.predictor, *evaluator, opts);
    emit(summary(st));
}

void Cli::cmd_resume()
{
    const std::string dir = state_dir(true);
    const SearchState persisted = load_state(dir);
    if (g_.dry_run) {
        json j = json::parse(summary(persisted));
        j["remaining"] = persisted.planned_records() - persisted.records.size();
        emit(j.dump() + "\n");
        return;
    }
    auto evaluator = make_evaluator(persisted.evaluator, persisted.space);
    const SearchState st = resume(dir, *evaluator, run_options(persisted.evaluator));
    emit(summary(st));
}

void Cli::cmd_report()
{
    if (curve_ != "top3")
        throw ConfigError("unknown curve '" + curve_ + "' (expected top3)");
    const SearchState st = load_state(state_dir(true));
    std::string text = "t,value\n";
    for (const auto& [t, v] : report_top3_curve(st, k_))
        text += std::to_string(t) + "," + fmt_double(v) + "\n";
    emit(text);
}

void Cli::cmd_bench_import(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    const auto records = import_bench(input_, parse_import_format(format_), sp);
    if (g_.out.empty())
        throw ConfigError("--out is required");
    write_bench(g_.out, records, sp);
    err_ << "imported " << records.size() << " records\n";
}

void Cli::cmd_bench_export()
{
    if (g_.out.empty())
        throw ConfigError("--out is required");
    if (dataset_.empty())
        throw ConfigError("--dataset is required");
    const SearchState st = load_state(state_dir(true));
    const BenchMethod method = method_.empty() ? (st.kind == RunKind::random_search ? BenchMethod::random
                                                                                      : BenchMethod::ours)
                                               : parse_bench_method(method_);
    const auto records = export_records(st.records, dataset_, method);
    write_bench(g_.out, records, st.space);
    err_ << "exported " << records.size() << " records\n";
}

void Cli::cmd_bench_histogram()
{
    const auto records = filtered(read_bench(input_));
    std::string text = "lower,count\n";
    for (const auto& b : histogram(records, bins_))
        text += fmt_double(b.lower) + "," + std::to_string(b.count) + "\n";
    emit(text);
}

void Cli::cmd_bench_to_surrogate(const SpaceFlags& sf)
{
    const auto sp = space(sf);
    const auto layout = feature_layout(sp);
    auto records = filtered(import_bench(input_, ImportFormat::bench_jsonl, sp));
    const auto ds = to_surrogate_dataset(records, layout.fingerprint);
    std::string text;
    for (const auto& slot : layout.slots)
        text += slot.name + ",";
    text += "score\n";
    for (std::size_t i = 0; i < ds.features.size(); ++i) {
        for (auto b : ds.features[i].bits)
            text += (b ? "1," : "0,");
        text += fmt_double(ds.scores[i]) + "\n";
    }
    emit(text);
}

void Cli::cmd_synthbench(const SpaceFlags& sf)
{
    if (g_.out.empty())
        throw ConfigError("--out is required");
    const auto sp = space(sf);
    SynthBenchConfig cfg;
    cfg.seed = seed();
    cfg.noise_std = noise_;
    if (g_.dry_run) {
        std::size_t total = 0;
        for (const auto& c : cfg.cells)
            total += c.count;
        out_ << total << " records planned\n";
        return;
    }
    const auto records = make_synthetic_bench(cfg, sp);
    write_bench(g_.out, records, sp);
    err_ << "wrote " << records.size() << " records\n";
}

int Cli::run(const std::vector<std::string>& args)
{
    CLI::App app{"Predictor-based architecture search for event-sequence classifiers", "seqnas"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", g_.seed, "Seed for every random draw");
    app.add_option("--config", g_.config, "Run configuration JSON file");
    app.add_option("--state-dir", g_.state_dir, "Run state directory (default: $SEQNAS_STATE_DIR)");
    app.add_option("--out", g_.out, "Write the command's output to this file");
    app.add_flag("--dry-run", g_.dry_run, "Validate and print the plan without running or writing state");

    SpaceFlags sf;
    int status = 0;

    auto* sample = app.add_subcommand("sample", "Sample architectures as JSON lines");
    add_space_flags(sample, sf);
    sample->add_option("-n,--count", count_, "Number of architectures")->check(CLI::PositiveNumber);
    sample->add_option("--mode", mode_, "per-factor or exact-uniform")
        ->check(CLI::IsMember({"per-factor", "exact-uniform"}));
    sample->callback([&] { cmd_sample(sf); });

    auto* enc = app.add_subcommand("encode", "Encode an architecture spec as an AVec bit string");
    add_space_flags(enc, sf);
    enc->add_option("spec", input_, "Spec JSON text, a file, or - for stdin");
    enc->add_flag("--layout", layout_, "Print the feature layout instead");
    enc->callback([&] { cmd_encode(sf); });

    auto* dec = app.add_subcommand("decode", "Decode an AVec bit string into a canonical spec");
    add_space_flags(dec, sf);
    dec->add_option("bits", input_, "0/1 string or - for stdin");
    dec->callback([&] { cmd_decode(sf); });

    auto* card = app.add_subcommand("cardinality", "Print the number of architectures in a space");
    add_space_flags(card, sf);
    card->add_flag("--encoder-only", encoder_only_, "Count encoder configurations only");
    card->callback([&] { cmd_cardinality(sf); });

    auto* val = app.add_subcommand("validate", "Check a spec (or, without one, the configuration)");
    add_space_flags(val, sf);
    val->add_option("spec", input_, "Spec JSON text, a file, or - for stdin");
    val->callback([&] { status = cmd_validate(sf); });

    auto* search = app.add_subcommand("search", "Run the predictor-guided search");
    search->callback([&] { cmd_search(false); });

    auto* rsearch = app.add_subcommand("random-search", "Run the random-search baseline");
    rsearch->add_option("--budget", budget_, "Number of architectures")->required();
    rsearch->add_flag("--kd", kd_, "Distil from the best models once enough are trained");
    rsearch->callback([&] { cmd_search(true); });

    auto* res = app.add_subcommand("resume", "Continue a persisted run");
    res->callback([&] { cmd_resume(); });

    auto* report = app.add_subcommand("report", "Emit figure data for a run as CSV");
    report->add_option("--curve", curve_, "Curve to emit")->check(CLI::IsMember({"top3"}));
    report->add_option("--k", k_, "Models averaged per point")->check(CLI::PositiveNumber);
    report->callback([&] { cmd_report(); });

    auto* bench = app.add_subcommand("bench", "Architecture benchmark files");
    bench->require_subcommand(1);
    auto* bimport = bench->add_subcommand("import", "Convert a third-party file to the bench format");
    add_space_flags(bimport, sf);
    bimport->add_option("input", input_, "Input file")->required();
    bimport->add_option("--format", format_, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
    bimport->callback([&] { cmd_bench_import(sf); });

    auto* bexport = bench->add_subcommand("export", "Write a run's records as a bench file");
    bexport->add_option("--dataset", dataset_, "Dataset name stored with each record");
    bexport->add_option("--method", method_, "ours or random")->check(CLI::IsMember({"ours", "random"}));
    bexport->callback([&] { cmd_bench_export(); });

    auto* bhist = bench->add_subcommand("histogram", "Score histogram as CSV");
    bhist->add_option("input", input_, "Bench file")->required();
    bhist->add_option("--bins", bins_, "Number of bins")->check(CLI::PositiveNumber);
    bhist->add_option("--dataset", dataset_, "Keep one dataset");
    bhist->add_option("--method", method_, "Keep one method")->check(CLI::IsMember({"ours", "random"}));
    bhist->callback([&] { cmd_bench_histogram(); });

    auto* bsur = bench->add_subcommand("to-surrogate", "Feature matrix and scores as CSV");
    add_space_flags(bsur, sf);
    bsur->add_option("input", input_, "Bench file")->required();
    bsur->add_option("--dataset", dataset_, "Keep one dataset");
    bsur->add_option("--method", method_, "Keep one method")->check(CLI::IsMember({"ours", "random"}));
    bsur->callback([&] { cmd_bench_to_surrogate(sf); });

    auto* synth = app.add_subcommand("synthbench", "Synthetic benchmark generation");
    synth->require_subcommand(1);
    auto* make = synth->add_subcommand("make", "Write a synthetic 3200-record bench file");
    add_space_flags(make, sf);
    make->add_option("--noise", noise_, "Score noise standard deviation")->check(CLI::NonNegativeNumber);
    make->callback([&] { cmd_synthbench(sf); });

    std::vector<const char*> argv{"seqnas"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out_ << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out_ << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out_ << e.what() << '\n';
            return 0;
        }
        err_ << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const Error& e) {
        err_ << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        err_ << "error: format: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err_ << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Cli cli(out, err);
    return cli.run(args);
}

}  // namespace seqnas
