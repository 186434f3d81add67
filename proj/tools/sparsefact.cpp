// sparsefact -- generate, factorize, reverse, diagnose, and benchmark
// random sparse deep linear chains from the command line.
//
// Exit codes: 0 success, 2 usage/validation/missing input, 3 algorithmic
// failure (recovery/conditioning/verification), 4 output IO failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsefact/diagnostics.hpp"
#include "sparsefact/equiv.hpp"
#include "sparsefact/genmodel.hpp"
#include "sparsefact/gram.hpp"
#include "sparsefact/io.hpp"
#include "sparsefact/peeling.hpp"
#include "sparsefact/recovery.hpp"
#include "sparsefact/reversal.hpp"
#include "sparsefact/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sparsefact;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAlgorithmic = 3;
constexpr int kExitIo = 4;

// Input problems (missing/corrupt files) are usage-class failures; only
// failures to WRITE results count as IO failures.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SparseIntMatrix load_smf(const std::string& path) {
    try {
        return read_smf1(path);
    } catch (const IoError& e) {
        throw InputError(e.what());
    } catch (const Error& e) {
        throw InputError(std::string(e.what()) + " (while reading " + path + ")");
    }
}

DenseMatrix load_dmf(const std::string& path) {
    try {
        return read_dmf1(path);
    } catch (const IoError& e) {
        throw InputError(e.what());
    } catch (const Error& e) {
        throw InputError(std::string(e.what()) + " (while reading " + path + ")");
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, text);  // throws IoError
}

int resolve_threads(int flag_value) {
    if (const char* env = std::getenv("THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end && *end == '\0' && v >= 0) return static_cast<int>(v);
    }
    return flag_value;
}

json layer_to_json(const LayerReport& l) {
    json j;
    j["index"] = l.index;
    j["margin"] = l.margin;
    j["candidates"] = l.candidate_count;
    j["residual"] = l.residual ? json(*l.residual) : json(nullptr);
    j["cond"] = l.cond_estimate ? json(*l.cond_estimate) : json(nullptr);
    j["status"] = to_string(l.status);
    return j;
}

json report_to_json(const FactorizationReport& r) {
    json j;
    j["layers"] = json::array();
    for (const auto& l : r.layers) j["layers"].push_back(layer_to_json(l));
    j["reconstruction_error"] =
        r.reconstruction_error ? json(*r.reconstruction_error) : json(nullptr);
    j["elapsed_ms"] = r.elapsed_ms;
    return j;
}

std::string csv_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
    int n = 0, d = 0, s = 1, threads = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_generate(const GenerateArgs& a) {
    ModelParams p{a.n, a.d, a.s, a.seed};
    p.validate();
    auto chain = gen_factor_chain(p);
    DenseMatrix y = forward_product(chain, p.d);
    ensure_dir(a.out);
    for (int i = 0; i < p.s; ++i)
        write_smf1((fs::path(a.out) / ("X" + std::to_string(i + 1) + ".smf")).string(),
                   chain[static_cast<std::size_t>(i)]);
    write_dmf1((fs::path(a.out) / "Y.dmf").string(), y);
    json manifest;
    manifest["n"] = p.n;
    manifest["d"] = p.d;
    manifest["s"] = p.s;
    manifest["seed"] = p.master_seed;
    manifest["format_versions"] = {{"smf", "SMF1"}, {"dmf", "DMF1"}};
    manifest["config"] = {{"command", "generate"}, {"n", a.n},    {"d", a.d},
                          {"s", a.s},              {"seed", a.seed},
                          {"out", a.out},          {"threads", resolve_threads(a.threads)}};
    write_text((fs::path(a.out) / "manifest.json").string(), manifest.dump(2) + "\n");
    std::printf("wrote %d factor(s), Y.dmf, manifest.json to %s\n", p.s, a.out.c_str());
    return kExitOk;
}

// ---- factorize ------------------------------------------------------------

struct FactorizeArgs {
    std::string y_path, out;
    int n = 0, d = 0, s = 1, threads = 0;
    double tau = 0.5, kappa_max = 1e8;
    bool emit_candidates = false;
};

int cmd_factorize(const FactorizeArgs& a) {
    DenseMatrix y = load_dmf(a.y_path);
    if (y.rows() != a.n || y.cols() != a.n)
        throw Error("factorize: Y is " + std::to_string(y.rows()) + "x" +
                    std::to_string(y.cols()) + ", expected " + std::to_string(a.n) + "x" +
                    std::to_string(a.n));
    RecoveryConfig cfg;
    cfg.tau = a.tau;
    cfg.d = a.d;
    ChainResult res = factorize_chain(y, a.n, a.d, a.s, cfg, a.kappa_max);

    ensure_dir(a.out);
    for (std::size_t i = 0; i < res.factors.size(); ++i)
        write_smf1((fs::path(a.out) / ("Xhat" + std::to_string(i + 1) + ".smf")).string(),
                   res.factors[i]);
    json report = report_to_json(res.report);
    report["config"] = {{"command", "factorize"}, {"y", a.y_path},       {"n", a.n},
                        {"d", a.d},               {"s", a.s},            {"out", a.out},
                        {"tau", a.tau},           {"kappa_max", a.kappa_max},
                        {"threads", resolve_threads(a.threads)}};
    write_text((fs::path(a.out) / "report.json").string(), report.dump(2) + "\n");

    const LayerStatus overall = res.report.overall();
    std::printf("factorize: %zu/%d layer(s) recovered, overall status %s\n", res.factors.size(),
                a.s, to_string(overall));
    for (const auto& l : res.report.layers)
        std::printf("  layer %d: margin %.6g, %zu candidate(s), status %s\n", l.index, l.margin,
                    l.candidate_count, to_string(l.status));
    if (res.report.reconstruction_error)
        std::printf("  reconstruction error %.3e\n", *res.report.reconstruction_error);
    return res.report.all_ok() ? kExitOk : kExitAlgorithmic;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    std::vector<int> ns, ds, ss;
    int trials = 1, threads = 0;
    std::uint64_t seed = 0;
    std::string out;
    bool no_timing = false;  // zero the ms column for byte-identical reruns
};

int cmd_bench(const BenchArgs& a) {
    if (a.ns.empty() || a.ds.empty() || a.ss.empty()) throw Error("bench: empty grid");
    if (a.trials < 1) throw Error("bench: trials must be >= 1");
    std::string csv = "n,d,s,trial,margin,candidates,status,matched,recon_error,ms\n";
    std::uint64_t cell = 0;
    for (int n : a.ns)
        for (int d : a.ds)
            for (int s : a.ss) {
                for (int trial = 0; trial < a.trials; ++trial) {
                    const std::uint64_t master =
                        substream_seed(a.seed, cell, static_cast<std::uint64_t>(trial));
                    ModelParams p{n, d, s, master};
                    p.validate();
                    auto chain = gen_factor_chain(p);
                    DenseMatrix y = forward_product(chain, d);
                    double margin = 0.0, recon = std::numeric_limits<double>::quiet_NaN();
                    std::size_t candidates = 0;
                    std::string status;
                    int matched = 0;
                    double ms = 0.0;
                    const auto t0 = std::chrono::steady_clock::now();
                    try {
                        ChainResult res = factorize_chain(y, n, d, s, RecoveryConfig{}, 1e8);
                        ms = res.report.elapsed_ms;
                        if (!res.report.layers.empty()) {
                            margin = res.report.layers.front().margin;
                            candidates = res.report.layers.front().candidate_count;
                        }
                        status = to_string(res.report.overall());
                        if (res.report.reconstruction_error)
                            recon = *res.report.reconstruction_error;
                        if (!res.factors.empty())
                            matched = match_factors(res.factors.front(), chain.front()).exact()
                                          ? 1
                                          : 0;
                    } catch (const Unsupported&) {
                        status = "unsupported_d";
                        ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
                    }
                    if (a.no_timing) ms = 0.0;
                    csv += std::to_string(n) + "," + std::to_string(d) + "," + std::to_string(s) +
                           "," + std::to_string(trial) + "," + csv_double(margin) + "," +
                           std::to_string(candidates) + "," + status + "," +
                           std::to_string(matched) + "," + csv_double(recon) + "," +
                           csv_double(ms) + "\n";
                }
                ++cell;
            }
    write_text(a.out, csv);
    json cfg = {{"command", "bench"},   {"n", a.ns},       {"d", a.ds},
                {"s", a.ss},            {"trials", a.trials}, {"seed", a.seed},
                {"out", a.out},         {"no_timing", a.no_timing},
                {"threads", resolve_threads(a.threads)}};
    std::printf("%s\n", cfg.dump().c_str());
    return kExitOk;
}

// ---- reverse --------------------------------------------------------------

struct ReverseArgs {
    std::string x_path, y_path, out;
    int d = 0, max_iters = -1, threads = 0;
    double tol = 1e-10, gamma = 0.0;  // gamma 0 = estimate
};

int cmd_reverse(const ReverseArgs& a) {
    SparseIntMatrix x = load_smf(a.x_path);
    DenseMatrix yv = load_dmf(a.y_path);
    if (yv.cols() != 1) throw Error("reverse: y must be a column vector (DMF1 with cols = 1)");
    if (yv.rows() != x.rows()) throw Error("reverse: |y| != rows of X");
    std::vector<double> y(yv.data().begin(), yv.data().end());
    const double gamma = a.gamma > 0.0 ? a.gamma : estimate_gamma(x, a.d);
    const int budget = a.max_iters >= 0 ? a.max_iters : 100 * std::max(1, x.rows());
    ReverseResult r = reverse_iterate(x, a.d, y, gamma, budget, a.tol);

    ensure_dir(a.out);
    DenseMatrix zhat(static_cast<int>(r.z_hat.size()), 1);
    for (std::size_t i = 0; i < r.z_hat.size(); ++i) zhat.data()[i] = r.z_hat[i];
    write_dmf1((fs::path(a.out) / "zhat.dmf").string(), zhat);
    std::string hist = "iteration,residual\n";
    for (std::size_t k = 0; k < r.residual_history.size(); ++k)
        hist += std::to_string(k) + "," + csv_double(r.residual_history[k]) + "\n";
    write_text((fs::path(a.out) / "residuals.csv").string(), hist);
    json rep;
    rep["converged"] = r.converged;
    rep["iterations"] = r.iterations;
    rep["final_residual"] = r.residual_history.back();
    rep["gamma"] = gamma;
    rep["config"] = {{"command", "reverse"}, {"x", a.x_path},   {"y", a.y_path},
                     {"d", a.d},             {"tol", a.tol},    {"max_iters", budget},
                     {"gamma", a.gamma},     {"out", a.out},
                     {"threads", resolve_threads(a.threads)}};
    write_text((fs::path(a.out) / "reverse.json").string(), rep.dump(2) + "\n");
    std::printf("reverse: %s after %d iteration(s), final residual %.3e\n",
                r.converged ? "converged" : "NOT converged", r.iterations,
                r.residual_history.back());
    return r.converged ? kExitOk : kExitAlgorithmic;
}

// ---- diag -----------------------------------------------------------------

struct DiagArgs {
    int n = 0, d = 0, s = 1, trials = 20, threads = 0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_diag(const DiagArgs& a) {
    ModelParams p{a.n, a.d, a.s, a.seed};
    p.validate();
    auto profile = entry_growth_profile(p, a.trials);
    std::string csv = "layer,nnz_mean,nnz_max,maxabs_mean,maxabs_max,m2,m4,cross,bound_M_scale\n";
    for (const auto& row : profile)
        csv += std::to_string(row.layer) + "," + csv_double(row.nnz_mean) + "," +
               std::to_string(row.nnz_max) + "," + csv_double(row.maxabs_mean) + "," +
               csv_double(row.maxabs_max) + "," + csv_double(row.m2) + "," +
               csv_double(row.m4) + "," + csv_double(row.cross) + "," +
               csv_double(row.bound_M_scale) + "\n";
    write_text(a.out, csv);
    auto ds = diagonal_concentration(p, std::min(a.trials, 20));
    auto cm = cross_correlation_estimate(p, a.trials);
    json cfg = {{"command", "diag"}, {"n", a.n},           {"d", a.d},
                {"s", a.s},          {"seed", a.seed},     {"trials", a.trials},
                {"out", a.out},      {"threads", resolve_threads(a.threads)}};
    std::printf("%s\n", cfg.dump().c_str());
    std::printf("diagonal concentration: mean ratio %.6f, max |ratio-1| %.3e, %lld zero row(s) "
                "skipped\n",
                ds.mean_ratio, ds.max_abs_deviation,
                static_cast<long long>(ds.skipped_zero_rows));
    std::printf("cross-moment at layer %d: %.6e (se %.3e, %lld samples)\n", a.s, cm.estimate,
                cm.standard_error, static_cast<long long>(cm.samples));
    return kExitOk;
}

// ---- verify ---------------------------------------------------------------

struct VerifyArgs {
    std::string a_path, b_path, out;
};

int cmd_verify(const VerifyArgs& a) {
    SparseIntMatrix ma = load_smf(a.a_path);
    SparseIntMatrix mb = load_smf(a.b_path);
    MatchResult m = match_factors(ma, mb);
    json j;
    j["matched"] = m.exact();
    j["mismatched"] = m.mismatched;
    j["permutation"] = m.permutation;
    j["flips"] = m.flips;
    j["config"] = {{"command", "verify"}, {"a", a.a_path}, {"b", a.b_path}, {"out", a.out}};
    const std::string text = j.dump(2) + "\n";
    if (!a.out.empty())
        write_text(a.out, text);
    else
        std::printf("%s", text.c_str());
    std::printf("verify: %d/%d column(s) matched\n", m.matched, ma.cols());
    return m.exact() ? kExitOk : kExitAlgorithmic;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse deep linear chain factorization toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file");

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "generate a seeded factor chain and its product");
    gen->add_option("--n", ga.n, "matrix order")->required();
    gen->add_option("--d", ga.d, "column sparsity")->required();
    gen->add_option("--s", ga.s, "chain depth")->required();
    gen->add_option("--seed", ga.seed, "master seed")->required();
    gen->add_option("--out", ga.out, "output directory")->required();
    gen->add_option("--threads", ga.threads, "thread count (0 = auto; THREADS env overrides)");

    FactorizeArgs fa;
    auto* fac = app.add_subcommand("factorize", "recover the factor chain from Y");
    fac->add_option("--y", fa.y_path, "input Y (DMF1)")->required();
    fac->add_option("--n", fa.n, "matrix order")->required();
    fac->add_option("--d", fa.d, "column sparsity")->required();
    fac->add_option("--s", fa.s, "chain depth")->required();
    fac->add_option("--out", fa.out, "output directory")->required();
    fac->add_option("--tau", fa.tau, "prune adjacency fraction (default 0.5)");
    fac->add_option("--kappa-max", fa.kappa_max, "condition number cutoff (default 1e8)");
    fac->add_option("--threads", fa.threads, "thread count (0 = auto; THREADS env overrides)");

    BenchArgs ba;
    auto* ben = app.add_subcommand("bench", "sweep a parameter grid; one CSV row per cell/trial");
    ben->add_option("--n", ba.ns, "grid of orders")->required();
    ben->add_option("--d", ba.ds, "grid of sparsities")->required();
    ben->add_option("--s", ba.ss, "grid of depths")->required();
    ben->add_option("--trials", ba.trials, "trials per cell (default 1)");
    ben->add_option("--seed", ba.seed, "bench master seed")->required();
    ben->add_option("--out", ba.out, "output CSV path")->required();
    ben->add_flag("--no-timing", ba.no_timing, "zero the ms column (byte-identical reruns)");
    ben->add_option("--threads", ba.threads, "thread count (0 = auto; THREADS env overrides)");

    ReverseArgs ra;
    auto* rev = app.add_subcommand("reverse", "recover z from y = (X/sqrt(d)) z");
    rev->add_option("--x", ra.x_path, "layer matrix (SMF1)")->required();
    rev->add_option("--y", ra.y_path, "observed vector (DMF1, one column)")->required();
    rev->add_option("--d", ra.d, "column sparsity")->required();
    rev->add_option("--out", ra.out, "output directory")->required();
    rev->add_option("--tol", ra.tol, "relative residual tolerance (default 1e-10)");
    rev->add_option("--max-iters", ra.max_iters, "iteration budget (default 100*n)");
    rev->add_option("--gamma", ra.gamma, "step size (default: 1/lambda_max estimate)");
    rev->add_option("--threads", ra.threads, "thread count (0 = auto; THREADS env overrides)");

    DiagArgs da;
    auto* dia = app.add_subcommand("diag", "entry growth, concentration, and cross-moment CSV");
    dia->add_option("--n", da.n, "matrix order")->required();
    dia->add_option("--d", da.d, "column sparsity")->required();
    dia->add_option("--s", da.s, "chain depth")->required();
    dia->add_option("--seed", da.seed, "master seed")->required();
    dia->add_option("--trials", da.trials, "trial count (default 20)");
    dia->add_option("--out", da.out, "output CSV path")->required();
    dia->add_option("--threads", da.threads, "thread count (0 = auto; THREADS env overrides)");

    VerifyArgs va;
    auto* ver = app.add_subcommand("verify", "match two factors up to permutation and sign");
    ver->add_option("--a", va.a_path, "first factor (SMF1)")->required();
    ver->add_option("--b", va.b_path, "second factor (SMF1)")->required();
    ver->add_option("--out", va.out, "write MatchResult JSON here (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_generate(ga);
        if (*fac) return cmd_factorize(fa);
        if (*ben) return cmd_bench(ba);
        if (*rev) return cmd_reverse(ra);
        if (*dia) return cmd_diag(da);
        if (*ver) return cmd_verify(va);
    } catch (const InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const IncompleteRecovery& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAlgorithmic;
    } catch (const IllConditioned& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAlgorithmic;
    } catch (const Singular& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAlgorithmic;
    } catch (const ZeroMatrix& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAlgorithmic;
    } catch (const Unsupported& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return kExitUsage;
}
