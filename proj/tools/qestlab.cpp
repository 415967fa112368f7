#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qestlab/channel_est.hpp"
#include "qestlab/json_io.hpp"
#include "qestlab/locc.hpp"
#include "qestlab/stats.hpp"
#include "qestlab/twostep.hpp"

namespace fs = std::filesystem;
using namespace qestlab;

namespace {

constexpr const char* kVersion = "0.1.0";

struct OutputSink {
    std::string path;   // empty = stdout
    bool force = false;
    Json manifest_config;
    std::string subcommand;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void check_writable() const {
        if (path.empty()) return;
        if (fs::exists(path) && !force)
            throw InvalidConfig("output file exists (use --force to overwrite): " + path);
    }

    void write_text(const std::string& body) const {
        if (path.empty()) {
            std::cout << body;
            return;
        }
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw InvalidConfig("cannot open output file: " + path);
        out << body;
    }

    void manifest(const std::string& status) const {
        Json m;
        m["config"] = manifest_config;
        m["subcommand"] = subcommand;
        m["version"] = kVersion;
        m["wall_clock_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m["status"] = status;
        if (path.empty()) {
            std::cerr << m.dump() << "\n";
        } else {
            std::ofstream out(path + ".manifest.json", std::ios::trunc);
            out << m.dump(2) << "\n";
        }
    }
};

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfig("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InvalidConfig(std::string("invalid JSON in ") + path + ": " + e.what());
    }
    return j;
}

/// Model refs are either a JSON config path or a builtin name, optionally
/// with a scalar parameter ("qubit-phase:0.9").
Json model_ref_json(const std::string& ref) {
    if (fs::exists(ref)) return read_json_file(ref);
    Json j;
    const auto colon = ref.find(':');
    if (colon == std::string::npos) {
        j["name"] = ref;
    } else {
        j["name"] = ref.substr(0, colon);
        j["params"]["value"] = std::stod(ref.substr(colon + 1));
    }
    return j;
}

Rvec parse_theta(const std::string& csv) {
    std::vector<double> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
    if (vals.empty()) throw InvalidConfig("--theta: empty list");
    Rvec v(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
    return v;
}

std::vector<long> parse_longs(const std::string& csv) {
    std::vector<long> vals;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(std::stol(tok));
    return vals;
}

Rmat load_g(const std::string& ref, int m) {
    if (ref.empty() || ref == "identity") return Rmat::Identity(m, m);
    const Json j = read_json_file(ref);
    const Rmat g = j.contains("matrix") ? parse_rmatrix(j["matrix"]) : parse_rmatrix(j);
    if (g.rows() != m || g.cols() != m) throw InvalidConfig("--g: dimension mismatch");
    return g;
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("QESTLAB_SEED")) return std::stoull(env);
    throw InvalidConfig("--seed required (or set QESTLAB_SEED)");
}

std::string fisher_json(const FisherMatrix& f) {
    Json j;
    j["matrix"] = emit_rmatrix(f.matrix);
    j["kind"] = f.kind == FisherMatrix::Kind::sld ? "sld" : "classical";
    return j.dump(2) + "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"qestlab: finite-dimensional quantum estimation laboratory"};
    app.require_subcommand(1);

    // Shared flag storage.
    std::string model_ref, model_a_ref, model_b_ref, povm_ref, g_ref = "identity";
    std::string theta_csv, ns_csv, schedule_ref, out_path, family, strategy = "product-probe";
    long n = 4096, n1 = 1, trials = 2000, grid = 36, ghz_shots = 200;
    double eps = 0.1;
    std::uint64_t seed = 0;
    int workers = 0;
    bool force = false, rebias = false;

    auto add_out = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_path, "output file (default: stdout)");
        cmd->add_flag("--force", force, "overwrite an existing output file");
    };

    CLI::App* qfi = app.add_subcommand("qfi", "SLD quantum Fisher information");
    qfi->add_option("--model", model_ref)->required();
    qfi->add_option("--theta", theta_csv)->required();
    add_out(qfi);

    CLI::App* cfi = app.add_subcommand("cfi", "classical Fisher information of a POVM");
    cfi->add_option("--model", model_ref)->required();
    cfi->add_option("--theta", theta_csv)->required();
    cfi->add_option("--povm", povm_ref)->required();
    add_out(cfi);

    CLI::App* lue = app.add_subcommand("lue", "locally unbiased estimator for a POVM");
    lue->add_option("--model", model_ref)->required();
    lue->add_option("--theta", theta_csv)->required();
    lue->add_option("--povm", povm_ref)->required();
    add_out(lue);

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo simulations");
    CLI::App* twostep_cmd = simulate->add_subcommand("two-step", "two-step adaptive estimator");
    twostep_cmd->add_option("--model", model_ref)->required();
    twostep_cmd->add_option("--theta", theta_csv)->required();
    twostep_cmd->add_option("--n", n);
    twostep_cmd->add_option("--n1", n1);
    twostep_cmd->add_option("--trials", trials);
    CLI::Option* ts_seed = twostep_cmd->add_option("--seed", seed);
    twostep_cmd->add_option("--g", g_ref);
    twostep_cmd->add_option("--workers", workers);
    add_out(twostep_cmd);

    CLI::App* adaptive_cmd = app.add_subcommand("adaptive", "adaptive schedules");
    CLI::App* verify = adaptive_cmd->add_subcommand("verify", "schedule identity checks");
    verify->add_option("--schedule", schedule_ref)->required();
    verify->add_option("--model", model_ref)->required();
    verify->add_option("--theta0", theta_csv)->required();
    verify->add_flag("--rebias", rebias, "rebias the configured estimator at theta0 first");
    add_out(verify);

    CLI::App* locc_cmd = app.add_subcommand("locc", "bipartite product-model estimation");
    CLI::App* bound_cmd = locc_cmd->add_subcommand("bound", "combined variance lower bound");
    bound_cmd->add_option("--model-a", model_a_ref)->required();
    bound_cmd->add_option("--model-b", model_b_ref)->required();
    bound_cmd->add_option("--theta", theta_csv)->required();
    bound_cmd->add_option("--g", g_ref);
    add_out(bound_cmd);
    CLI::App* search_cmd = locc_cmd->add_subcommand("search", "brute-force local-axis search");
    search_cmd->add_option("--model-a", model_a_ref)->required();
    search_cmd->add_option("--model-b", model_b_ref)->required();
    search_cmd->add_option("--theta", theta_csv)->required();
    search_cmd->add_option("--g", g_ref);
    search_cmd->add_option("--grid", grid);
    add_out(search_cmd);

    CLI::App* channel_cmd = app.add_subcommand("channel", "quantum-operation estimation");
    CLI::App* interior = channel_cmd->add_subcommand("interior", "interiority via CP tests");
    interior->add_option("--family", family)->required();
    interior->add_option("--theta", theta_csv)->required();
    interior->add_option("--eps", eps);
    add_out(interior);
    CLI::App* scaling = channel_cmd->add_subcommand("scaling", "MSE scaling experiment");
    scaling->add_option("--family", family)->required();
    scaling->add_option("--theta", theta_csv)->required();
    scaling->add_option("--strategy", strategy);
    scaling->add_option("--ns", ns_csv)->required();
    scaling->add_option("--trials", trials);
    CLI::Option* sc_seed = scaling->add_option("--seed", seed);
    scaling->add_option("--ghz-shots", ghz_shots);
    add_out(scaling);

    CLI::App* regcheck = app.add_subcommand("regcheck", "model regularity diagnostics");
    regcheck->add_option("--model", model_ref)->required();
    regcheck->add_option("--theta", theta_csv, "grid anchor (defaults to region center)");
    long grid_steps = 9;
    regcheck->add_option("--grid-steps", grid_steps);
    add_out(regcheck);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    OutputSink sink;
    sink.force = force;
    sink.path = out_path;
    {
        Json cfg;
        for (int i = 1; i < argc; ++i) cfg.push_back(argv[i]);
        sink.manifest_config = cfg;
    }

    try {
        if (qfi->parsed()) {
            sink.subcommand = "qfi";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            sink.write_text(fisher_json(qfi_sld(model, parse_theta(theta_csv))));
        } else if (cfi->parsed()) {
            sink.subcommand = "cfi";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            const Povm povm = load_povm(read_json_file(povm_ref));
            sink.write_text(fisher_json(classical_fisher(model, parse_theta(theta_csv), povm)));
        } else if (lue->parsed()) {
            sink.subcommand = "lue";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            const Povm povm = load_povm(read_json_file(povm_ref));
            const Rvec theta = parse_theta(theta_csv);
            const Estimator est = locally_unbiased_estimator(model, theta, povm);
            const EstimationReport rep =
                evaluate_exact(est, model, theta, Rmat::Identity(model.region.m, model.region.m));
            Json j;
            Json values = Json::array();
            for (const auto& v : est.values) {
                Json row = Json::array();
                for (Eigen::Index i = 0; i < v.size(); ++i) row.push_back(v[i]);
                values.push_back(std::move(row));
            }
            j["values"] = values;
            j["matrix"] = emit_rmatrix(rep.variance);
            j["kind"] = "lue-variance";
            j["b_matrix"] = emit_rmatrix(rep.b_matrix);
            sink.write_text(j.dump(2) + "\n");
        } else if (twostep_cmd->parsed()) {
            sink.subcommand = "simulate two-step";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            const Rvec theta = parse_theta(theta_csv);
            const Rmat g = load_g(g_ref, model.region.m);
            TwoStepConfig cfg;
            cfg.n = n;
            cfg.n1 = n1;
            cfg.seed = resolve_seed(ts_seed, seed);
            const McResult mc = monte_carlo(model, theta, cfg, trials, g, workers);
            double ks = std::numeric_limits<double>::quiet_NaN();
            if (model.region.m == 1) ks = normality_ks(mc, model, theta, g);
            std::ostringstream csv;
            csv << "model,theta,n,n0,n1,n2,trials,seed,n_mse_trace,stderr,bias_norm,ks_stat,"
                   "flagged_trials\n";
            csv << model.name << "," << format_double(theta[0]) << "," << n << "," << mc.n0 << ","
                << mc.n1 << "," << mc.n2 << "," << trials << "," << cfg.seed << ","
                << format_double(mc.n_weighted_cost) << ","
                << format_double(mc.n_weighted_cost_stderr) << ","
                << format_double(mc.report.bias.norm()) << "," << format_double(ks) << ","
                << mc.flagged_trials << "\n";
            sink.write_text(csv.str());
        } else if (verify->parsed()) {
            sink.subcommand = "adaptive verify";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            const Rvec theta0 = parse_theta(theta_csv);
            const ScheduleConfig sc = load_schedule(read_json_file(schedule_ref));
            if (!sc.value_fn)
                throw InvalidConfig("adaptive verify: schedule config must define an estimator");
            ScheduleEstimator est{sc.schedule, sc.value_fn};
            if (rebias) est = rebias_schedule_estimator(est, model, theta0);
            double max_residual = 0.0;
            for (int r = 0; r < sc.schedule.rounds; ++r)
                for (int k = 0; k < sc.schedule.n_samples; ++k)
                    max_residual = std::max(max_residual, leibniz_check(est, model, theta0, r, k));
            const FakeEnsembleReduction red = fake_ensemble_reduce(est, model, theta0);
            // Zero-probability outcome paths are pruned from conditional
            // expectations; report how many there were rather than hiding it.
            const OutcomeTree tree = enumerate_schedule(
                sc.schedule, std::vector<DensityOperator>(sc.schedule.n_samples,
                                                          model.state_fn(theta0)));
            long pruned = 0;
            for (const auto& path : tree.paths)
                if (path.prob < 1e-14) ++pruned;
            Json j;
            j["leibniz_residual"] = max_residual;
            j["psd_gap"] = red.report.psd_gap;
            j["b_error"] = max_abs(red.report.b_matrix -
                                   Rmat::Identity(model.region.m, model.region.m));
            j["pruned_paths"] = pruned;
            sink.write_text(j.dump(2) + "\n");
        } else if (bound_cmd->parsed()) {
            sink.subcommand = "locc bound";
            sink.check_writable();
            const StateModel ma = load_state_model(model_ref_json(model_a_ref));
            const StateModel mb = load_state_model(model_ref_json(model_b_ref));
            const Rvec theta = parse_theta(theta_csv);
            const Rmat g = load_g(g_ref, ma.region.m);
            const Rmat pa = identifiability_projector(ma, theta).matrix;
            const Rmat pb = identifiability_projector(mb, theta).matrix;
            const Rmat va = sym_pinv(qfi_sld(ma, theta).matrix);
            const Rmat vb = sym_pinv(qfi_sld(mb, theta).matrix);
            Json j;
            j["bound"] = locc_variance_bound(va, vb, pa, pb, g);
            j["projectors"] = Json::array({emit_rmatrix(pa), emit_rmatrix(pb)});
            sink.write_text(j.dump(2) + "\n");
        } else if (search_cmd->parsed()) {
            sink.subcommand = "locc search";
            sink.check_writable();
            const ProductModel pm{load_state_model(model_ref_json(model_a_ref)),
                                  load_state_model(model_ref_json(model_b_ref))};
            const Rvec theta = parse_theta(theta_csv);
            const Rmat g = load_g(g_ref, pm.model_a.region.m);
            const LoSearchResult res = brute_force_lo_search(pm, theta, g, static_cast<int>(grid));
            Json j;
            j["best_cost"] = res.best_cost;
            j["axes"] = Json::array({Json::array({res.axis_a.x(), res.axis_a.y(), res.axis_a.z()}),
                                     Json::array({res.axis_b.x(), res.axis_b.y(), res.axis_b.z()})});
            sink.write_text(j.dump(2) + "\n");
        } else if (interior->parsed()) {
            sink.subcommand = "channel interior";
            sink.check_writable();
            const ChannelModel cm = load_channel_model(model_ref_json(family));
            Json j;
            j["interior"] = interiority_check(cm, parse_theta(theta_csv), eps);
            sink.write_text(j.dump(2) + "\n");
        } else if (scaling->parsed()) {
            sink.subcommand = "channel scaling";
            sink.check_writable();
            const ChannelModel cm = load_channel_model(model_ref_json(family));
            const Rvec theta = parse_theta(theta_csv);
            const std::uint64_t run_seed = resolve_seed(sc_seed, seed);
            const std::vector<ScalingRow> rows = scaling_experiment(
                cm, theta, parse_strategy(strategy), parse_longs(ns_csv), trials, run_seed,
                ghz_shots);
            std::ostringstream csv;
            csv << "family,theta,strategy,n,trials,mse,n_mse,n2_mse,stderr\n";
            for (const auto& row : rows)
                csv << cm.name << "," << format_double(theta[0]) << "," << strategy << ","
                    << row.n << "," << row.trials << "," << format_double(row.mse) << ","
                    << format_double(row.n_mse) << "," << format_double(row.n2_mse) << ","
                    << format_double(row.stderr_n_mse) << "\n";
            sink.write_text(csv.str());
        } else if (regcheck->parsed()) {
            sink.subcommand = "regcheck";
            sink.check_writable();
            const StateModel model = load_state_model(model_ref_json(model_ref));
            std::vector<Rvec> pts;
            const Rvec center =
                theta_csv.empty() ? model.region.center() : parse_theta(theta_csv);
            // Axis-aligned grid through the anchor, grid_steps per coordinate.
            for (int i = 0; i < model.region.m; ++i) {
                const auto [lo, hi] = model.region.box[i];
                for (long s = 0; s < grid_steps; ++s) {
                    Rvec p = center;
                    p[i] = lo + (hi - lo) * (s + 1.0) / (grid_steps + 1.0);
                    pts.push_back(model.region.clip(p));
                }
            }
            const RegularityDiagnostics diag = estimate_regularity(model, pts);
            Json j;
            j["a1_estimate"] = diag.a1_estimate;
            j["a2_estimate"] = diag.a2_estimate;
            j["b1_estimate"] = diag.b1_estimate;
            j["m2_ok"] = diag.m2_ok;
            j["notes"] = diag.notes;
            sink.write_text(j.dump(2) + "\n");
        }
        sink.manifest("ok");
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        sink.manifest(std::string("config error: ") + e.what());
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        sink.manifest(std::string("numerical failure: ") + e.what());
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        sink.manifest(std::string("error: ") + e.what());
        return 2;
    }
    return 0;
}
