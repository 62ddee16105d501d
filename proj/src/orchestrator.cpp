#include "wr/orchestrator.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "wr/combinatorics.hpp"
#include "wr/parallel.hpp"

#ifndef WR_VERSION
#define WR_VERSION "unversioned"
#endif

namespace fs = std::filesystem;

namespace wr {

bool RunResult::pass() const {
    return std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return g.pass; });
}

std::string versionStamp() { return std::string("wrlab ") + WR_VERSION; }

RunLog::RunLog(const std::string& path, bool echo) : out_(path, std::ios::app), echo_(echo) {}

void RunLog::operator()(const std::string& msg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    out_ << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << " " << msg << "\n";
    out_.flush();
    if (echo_) std::cerr << msg << "\n";
}

std::string sha256File(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, std::size_t(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned j = 0; j < len; ++j) os << std::hex << std::setw(2) << std::setfill('0') << int(md[j]);
    return os.str();
}

namespace {

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string orderStr(OrderPair m) { return std::to_string(m.m0) + ":" + std::to_string(m.m1); }

// CSV with a leading schema comment naming every column.
class Csv {
public:
    Csv(const fs::path& path, const std::string& schema, const std::vector<std::string>& columns) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        out_ << "# " << schema << "\n";
        for (std::size_t j = 0; j < columns.size(); ++j) out_ << (j ? "," : "") << columns[j];
        out_ << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t j = 0; j < cells.size(); ++j) out_ << (j ? "," : "") << cells[j];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

std::vector<std::vector<std::string>> readCsv(const fs::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::ifstream in(path);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream is(line);
        std::string c;
        while (std::getline(is, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

double dbl(const std::string& s) { return std::stod(s); }

Box centralBox(const Domain& dom) {
    Box b;
    for (int k = 0; k < dom.d; ++k) {
        b.lo[k] = dom.L / 4;
        b.hi[k] = 3 * dom.L / 4;
    }
    return b;
}

double observableValue(const Theta& th0, const Theta& th1, OrderPair m,
                       const Configuration& g) {
    return orderedProductSum(g, m, th0, th1) / (factorial(m.m0) * factorial(m.m1));
}

struct Context {
    const ExperimentConfig& cfg;
    fs::path dir;
    RunLog& log;
    KernelSet ks;
    std::vector<EventTrace> traces;
    bool simulated = false;

    const std::vector<EventTrace>& paths() {
        if (!simulated) {
            log("simulating " + std::to_string(cfg.paths) + " paths to t = " + num(cfg.tEnd));
            traces = batchSimulate(ks, cfg.sampler(), cfg.paths, cfg.tEnd, cfg.sigma, cfg.seed);
            simulated = true;
            fs::create_directories(dir / "traces");
            const std::size_t keep = std::min<std::size_t>(cfg.saveTraces, traces.size());
            for (std::size_t p = 0; p < keep; ++p) {
                std::ostringstream name;
                name << "path_" << std::setw(6) << std::setfill('0') << p << ".jsonl";
                std::ofstream out(dir / "traces" / name.str());
                writeTrace(out, traces[p], cfg.psi);
            }
        }
        return traces;
    }
    fs::path report(const std::string& name) const { return dir / "reports" / (name + ".csv"); }
};

double kappaMax(const ExperimentConfig& cfg) { return std::max(cfg.kappa0, cfg.kappa1); }

GateResult gateAudit(Context& cx) {
    const auto& tr = cx.paths();
    std::size_t bad = 0, events = 0, replayBad = 0;
    std::string first;
    for (const auto& t : tr) {
        events += t.events.size();
        const std::string a = auditTrace(t, &cx.ks);
        if (!a.empty()) {
            ++bad;
            if (first.empty()) first = a;
        }
    }
    // Trace replay: serialize, read back, serialize again.
    const std::size_t nReplay = std::min<std::size_t>(tr.size(), 50);
    for (std::size_t p = 0; p < nReplay; ++p) {
        std::stringstream s1;
        writeTrace(s1, tr[p], cx.cfg.psi);
        const EventTrace back = readTrace(s1);
        std::ostringstream s2;
        writeTrace(s2, back, cx.cfg.psi);
        if (s1.str() != s2.str() || !(finalConfiguration(back) == finalConfiguration(tr[p]))) ++replayBad;
    }
    // Schedule independence: a serial re-run of a prefix of the batch must match bitwise.
    const std::size_t nSerial = std::min<std::size_t>(tr.size(), 100);
    const auto serial = batchSimulate(cx.ks, cx.cfg.sampler(), nSerial, cx.cfg.tEnd, cx.cfg.sigma, cx.cfg.seed, 1);
    std::size_t schedBad = 0;
    for (std::size_t p = 0; p < nSerial; ++p) {
        std::ostringstream a, b;
        writeTrace(a, tr[p], cx.cfg.psi);
        writeTrace(b, serial[p], cx.cfg.psi);
        if (a.str() != b.str()) ++schedBad;
    }
    Csv csv(cx.report("audit"), "structural audit: paths, events, failures", {"check", "checked", "failures"});
    csv.row({"structure", std::to_string(tr.size()), std::to_string(bad)});
    csv.row({"replay", std::to_string(nReplay), std::to_string(replayBad)});
    csv.row({"schedule", std::to_string(nSerial), std::to_string(schedBad)});
    GateResult g{"audit", bad == 0 && replayBad == 0 && schedBad == 0, ""};
    g.detail = std::to_string(tr.size()) + " paths, " + std::to_string(events) + " events, " + std::to_string(bad) +
               " structural, " + std::to_string(replayBad) + " replay, " + std::to_string(schedBad) +
               " schedule failures" + (first.empty() ? "" : " (" + first + ")");
    return g;
}

GateResult gateIdentities(Context& cx) {
    const auto checks = verifyIdentities();
    Csv csv(cx.report("identities"), "exact combinatorial identities", {"identity", "pass", "detail"});
    bool ok = true;
    for (const auto& c : checks) {
        csv.row({"\"" + c.name + "\"", c.pass ? "1" : "0", "\"" + c.detail + "\""});
        ok = ok && c.pass;
    }
    return {"identities", ok, std::to_string(checks.size()) + " identities"};
}

GateResult gateMoments(Context& cx) {
    if (cx.cfg.law != "poisson") return {"moments", false, "requires a Poisson initial law"};
    const auto& tr = cx.paths();
    const Box box = centralBox(cx.ks.dom);
    Csv csv(cx.report("moments"), "moment bounds: estimate - 3 SE <= bound",
            {"t", "kind", "parameter", "estimate", "se", "bound", "pass"});
    bool ok = true;
    for (double t : cx.cfg.times) {
        const double kappa = typeEnvelope(std::log(kappaMax(cx.cfg)), cx.ks.c.alpha, t);
        const BoundReport mb = momentBoundCheck(tr, t, box, 4, kappa);
        const BoundReport eb = expMomentCheck(tr, t, {0.5, 1.0}, kappa, cx.cfg.psi);
        for (const auto& [kind, rep] : {std::pair{"moment", &mb}, std::pair{"exp-moment", &eb}})
            for (const auto& r : rep->rows)
                csv.row({num(t), kind, num(r.parameter), num(r.estimate.value), num(r.estimate.se), num(r.bound),
                         r.pass ? "1" : "0"});
        ok = ok && mb.pass() && eb.pass();
    }
    return {"moments", ok, std::to_string(cx.cfg.times.size()) + " times, n <= 4, beta in {0.5, 1}"};
}

GateResult gateCompare(Context& cx) {
    const auto rows = compareDualVsMC(cx.cfg, cx.paths(), cx.cfg.times);
    Csv csv(cx.report("compare"), "dual expectation vs Monte Carlo; z = (dual - mc)/se",
            {"order", "t", "dual", "budget", "mc", "se", "z", "error"});
    bool ok = true;
    double worst = 0;
    for (const auto& r : rows) {
        csv.row({orderStr(r.order), num(r.t), num(r.dual), num(r.budget), num(r.mc.value), num(r.mc.se), num(r.z),
                 r.error});
        ok = ok && r.error.empty() && std::abs(r.z) < 3;
        worst = std::max(worst, std::abs(r.z));
    }
    return {"compare", ok, std::to_string(rows.size()) + " rows, max |z| = " + num(worst)};
}

GateResult gateRuelle(Context& cx) {
    const ExperimentConfig& cfg = cx.cfg;
    if (cfg.law != "poisson") return {"ruelle", false, "requires a Poisson initial law"};
    if (std::exp(cfg.theta0) < kappaMax(cfg)) return {"ruelle", false, "declared type e^theta0 below the intensities"};
    const TorusGrid grid(cx.ks.dom, cfg.n);
    const HierarchyOperators ops(cx.ks, grid, cfg.sigma);
    const HierarchyParams p = cfg.hierarchy();
    CorrelationField k = poissonField(grid, cfg.M, cfg.kappa0, cfg.kappa1);
    k.theta = p.theta0;
    fs::create_directories(cx.dir / "fields");
    Csv csv(cx.report("ruelle"), "Ruelle bound on evolved fields and Monte Carlo type estimate",
            {"t", "ruelle_violation", "type_estimate", "type_se", "type_bound", "pass"});
    const auto& tr = cx.paths();
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    bool ok = true;
    double tPrev = 0;
    for (double t : cfg.times) {
        if (t > tPrev) {
            HierarchyParams q = p;
            q.theta0 = k.theta;
            const EvolutionReport r = evolveForward(ops, k, t - tPrev, q);
            k.k = r.field;
            k.theta = r.theta;
            tPrev = t;
        }
        const double violation = ruelleViolation(k.k, p.theta0 + cx.ks.c.alpha * t);
        std::ofstream f(cx.dir / "fields" / ("forward_t" + num(t) + ".field"), std::ios::binary);
        writeField(f, k.k, k.theta, "forward:t=" + num(t));
        const TypeEstimate te = typeEstimate(tr, t, th0, th1, std::min(cfg.M, 3));
        const double bound = std::exp(p.theta0 + (cx.ks.c.alpha + 1) * t);
        const bool pass = violation <= 1e-6 && te.estimate.value <= bound + 3 * te.estimate.se;
        csv.row({num(t), num(violation), num(te.estimate.value), num(te.estimate.se), num(bound), pass ? "1" : "0"});
        ok = ok && pass;
    }
    return {"ruelle", ok, std::to_string(cfg.times.size()) + " times"};
}

// Conditioning factor 1 + tanh(N_0 - κ0 L^d), a bounded function of the state at s1.
std::function<double(const Configuration&)> conditioningFactor(const ExperimentConfig& cfg) {
    const double mean = cfg.kappa0 * cfg.domain().volume();
    return [mean](const Configuration& g) { return 1.0 + std::tanh(double(g.type[0].size()) - mean); };
}

GateResult gateMartingale(Context& cx) {
    const ExperimentConfig& cfg = cx.cfg;
    const auto& tr = cx.paths();
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    const double t1 = cfg.tEnd / 4, t2 = 3 * cfg.tEnd / 4, s1 = cfg.tEnd / 8;
    std::vector<TestFunction> fs{
        ftildeTest(cx.ks, cfg.sigma, th0, th1, th0.cTheta() + 0.2, th1.cTheta() + 0.2, cfg.psi),
        fhatTest(cx.ks, cfg.sigma, {1, 1}, {0.5, 0.5}, {std::vector<Theta>{th0}, std::vector<Theta>{th1}}, cfg.psi)};
    Csv csv(cx.report("martingale"), "martingale residuals F(X_t2) - F(X_t1) - int LF",
            {"test", "t1", "t2", "residual", "se", "max_quad_error", "pass"});
    bool ok = true;
    for (const auto& F : fs) {
        const auto reps = martingaleResidualPair(tr, F, t1, t2, conditioningFactor(cfg), s1);
        for (const auto& r : reps) {
            csv.row({"\"" + r.name + "\"", num(r.t1), num(r.t2), num(r.residual.value), num(r.residual.se),
                     num(r.maxQuadError), r.within3SE() ? "1" : "0"});
            ok = ok && r.within3SE();
        }
    }
    return {"martingale", ok, std::to_string(2 * fs.size()) + " residuals"};
}

GateResult gateChentsov(Context& cx) {
    const ChentsovSweep s = chentsovSweep(cx.paths(), cx.cfg.chentsovCenter, cx.cfg.chentsovSpacings, cx.cfg.psi);
    Csv csv(cx.report("chentsov"), "Chentsov product moment W against window spacing",
            {"spacing", "w", "se", "slope", "slope_se"});
    for (const auto& p : s.points) csv.row({num(p.spacing), num(p.w.value), num(p.w.se), "", ""});
    csv.row({"fit", "", "", num(s.slope), num(s.slopeSE)});
    return {"chentsov", s.slope >= 1.7, "slope " + num(s.slope) + " +- " + num(s.slopeSE)};
}

GateResult gateSigma(Context& cx) {
    const ExperimentConfig& cfg = cx.cfg;
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    const double tau0 = th0.cTheta() + 0.2, tau1 = th1.cTheta() + 0.2;
    const Domain dom = cx.ks.dom;
    const PsiMode mode = cfg.psi;
    auto F = [dom, th0, th1, tau0, tau1, mode](const Configuration& g) {
        return evalFtilde(dom, th0, th1, tau0, tau1, g, mode);
    };
    cx.log("sigma sweep over " + std::to_string(cfg.sigmas.size()) + " values");
    const auto rows = sigmaConvergenceSweep(cx.ks, cfg.sampler(), cfg.paths, cfg.seed, F, cfg.sweepTime, cfg.sigmas);
    Csv csv(cx.report("sigma_sweep"), "paired sigma-approximation discrepancy mu^sigma(F) - mu^0(F)",
            {"sigma", "mean", "mean_se", "difference", "difference_se"});
    for (const auto& r : rows)
        csv.row({num(r.sigma), num(r.mean.value), num(r.mean.se), num(r.difference.value), num(r.difference.se)});
    return {"sigma-sweep", sigmaMonotone(rows), std::to_string(rows.size()) + " sigma values"};
}

MultiField observableAll(const ExperimentConfig& cfg, const TorusGrid& grid) {
    MultiField G(grid, cfg.M);
    for (const auto& m : cfg.orders) G.axpy(1.0, observableField(cfg, grid, m));
    return G;
}

GateResult gateDual(Context& cx) {
    const ExperimentConfig& cfg = cx.cfg;
    const TorusGrid grid(cx.ks.dom, cfg.n);
    const HierarchyOperators ops(cx.ks, grid, cfg.sigma);
    const HierarchyParams p = cfg.hierarchy();
    const MultiField G = observableAll(cfg, grid);
    fs::create_directories(cx.dir / "fields");
    Csv csv(cx.report("dual"), "dual evolution of the configured observable",
            {"t", "value", "series_remainder", "quadrature", "truncation", "converged"});
    bool ok = true;
    const auto reps = evolveDualGrid(ops, G, cfg.times, p);
    CorrelationField k0;
    if (cfg.law == "poisson") {
        k0 = poissonField(grid, cfg.M, cfg.kappa0, cfg.kappa1);
        k0.theta = p.theta0;
    }
    for (std::size_t j = 0; j < reps.size(); ++j) {
        std::ofstream f(cx.dir / "fields" / ("dual_t" + num(cfg.times[j]) + ".field"), std::ios::binary);
        writeField(f, reps[j].field, reps[j].theta, "dual:t=" + num(cfg.times[j]));
        DualExpectation e;
        if (cfg.law == "poisson") e = pairWithBudget(ops, k0, reps[j]);
        csv.row({num(cfg.times[j]), num(e.value), num(e.seriesRemainder), num(e.quadrature), num(e.truncation),
                 reps[j].converged ? "1" : "0"});
        ok = ok && reps[j].converged;
    }
    // Empirical grid convergence at the last time: values on n/4, n/2, n and the Richardson ratio.
    if (cfg.law == "poisson" && cfg.n % 4 == 0 && cfg.n >= 8 && !cfg.times.empty()) {
        Csv conv(cx.report("grid_convergence"), "dual expectation at the last time on refined grids",
                 {"n", "value", "richardson_ratio"});
        std::vector<double> values;
        for (int n : {cfg.n / 4, cfg.n / 2, cfg.n}) {
            const TorusGrid g(cx.ks.dom, n);
            const HierarchyOperators o(cx.ks, g, cfg.sigma);
            CorrelationField k = poissonField(g, cfg.M, cfg.kappa0, cfg.kappa1);
            k.theta = p.theta0;
            values.push_back(expectationViaDual(o, k, observableAll(cfg, g), cfg.times.back(), p).value);
            std::string ratio;
            if (values.size() == 3 && values[2] != values[1])
                ratio = num((values[1] - values[0]) / (values[2] - values[1]));
            conv.row({std::to_string(n), num(values.back()), ratio});
        }
    }
    return {"dual", ok, std::to_string(reps.size()) + " times"};
}

GateResult gateFreeOracle(Context& cx) {
    const ExperimentConfig& cfg = cx.cfg;
    if (cfg.sigma != 0.0 || !cx.ks.phi[0].isZero() || !cx.ks.phi[1].isZero())
        return {"free-oracle", false, "requires sigma = 0 and vanishing repulsion"};
    const TorusGrid grid(cx.ks.dom, cfg.n);
    const HierarchyOperators ops(cx.ks, grid, 0.0);
    const MultiField G = observableField(cfg, grid, {1, 0});
    const FreeSpectralSolution exact(grid, cx.ks.a[0], G.at({1, 0}));
    const auto reps = evolveDualGrid(ops, G, cfg.times, cfg.hierarchy());
    Csv csv(cx.report("free_oracle"), "one-point evolution against the spectral closed form",
            {"t", "relative_error", "dual_value", "mc", "mc_se", "z"});
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    const auto& tr = cx.paths();
    bool ok = true;
    double worst = 0;
    for (std::size_t j = 0; j < reps.size(); ++j) {
        const auto ref = exact.atNodes(cfg.times[j]);
        const auto& got = reps[j].field.at({1, 0});
        double err = 0, scale = 0;
        for (std::size_t q = 0; q < ref.size(); ++q) {
            err = std::max(err, std::abs(got[q] - ref[q]));
            scale = std::max(scale, std::abs(ref[q]));
        }
        const double rel = err / scale;
        worst = std::max(worst, rel);
        double value = 0, z = 0;
        EstimateWithError mc;
        if (cfg.law == "poisson") {
            CorrelationField k0 = poissonField(grid, cfg.M, cfg.kappa0, cfg.kappa1);
            value = pairKG(k0.k, reps[j].field);
            mc = empiricalChi(tr, cfg.times[j], {1, 0}, th0, th1);
            z = mc.se > 0 ? (value - mc.value) / mc.se : 0;
        }
        csv.row({num(cfg.times[j]), num(rel), num(value), num(mc.value), num(mc.se), num(z)});
        ok = ok && rel <= 1e-6 && std::abs(z) < 3;
    }
    return {"free-oracle", ok, "max relative error " + num(worst)};
}

void writeManifest(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), dir).generic_string();
        if (rel == "run.log" || rel == "manifest.sha256") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::ofstream out(dir / "manifest.sha256");
    for (const auto& f : files) out << sha256File((dir / f).string()) << "  " << f << "\n";
}

void writeConstants(const fs::path& path, const ExperimentConfig& cfg, const KernelSet& ks) {
    nlohmann::ordered_json j;
    j["version"] = versionStamp();
    j["psi_mode"] = toString(cfg.psi);
    j["alpha"] = ks.c.alpha;
    j["a_sup"] = ks.c.aNorm;
    j["phi_bar"] = ks.c.phiBar;
    j["alpha_bar"] = ks.c.alphaBar;
    j["alpha_bar_i"] = {ks.c.alphaBarI[0], ks.c.alphaBarI[1]};
    j["c_a"] = ks.c.cA;
    for (int i = 0; i < 2; ++i) {
        j["a" + std::to_string(i)] = {{"kernel", ks.a[i].describe()}, {"moments", ks.a[i].moments()}};
        j["phi" + std::to_string(i)] = {{"kernel", ks.phi[i].describe()}, {"phi_bar", ks.phi[i].phiBar()}};
    }
    if (ks.c.phiBar > 0) {
        const TStar ts = tStar(ks.c, cfg.theta0);
        j["t_star"] = {{"theta", cfg.theta0}, {"delta", ts.delta}, {"T", ts.T}};
    } else {
        j["t_star"] = nullptr;
    }
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

}  // namespace

MultiField observableField(const ExperimentConfig& cfg, const TorusGrid& grid, OrderPair m) {
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    MultiField G(grid, cfg.M);
    if (!G.has(m)) throw std::invalid_argument("observable order above the stored order M");
    G.fill(m, [&](const std::vector<Point>& x, const std::vector<Point>& y) {
        double v = 1;
        for (const auto& p : x) v *= th0(p);
        for (const auto& p : y) v *= th1(p);
        return v;
    });
    return G;
}

std::vector<CompareRow> compareDualVsMC(const ExperimentConfig& cfg, const std::vector<EventTrace>& traces,
                                        const std::vector<double>& times) {
    if (cfg.law != "poisson") throw std::invalid_argument("compareDualVsMC requires a Poisson initial law");
    const KernelSet ks = cfg.kernels();
    const TorusGrid grid(ks.dom, cfg.n);
    const HierarchyOperators ops(ks, grid, cfg.sigma);
    const HierarchyParams p = cfg.hierarchy();
    CorrelationField k0 = poissonField(grid, cfg.M, cfg.kappa0, cfg.kappa1);
    k0.theta = p.theta0;
    const Theta th0 = cfg.makeTheta(0), th1 = cfg.makeTheta(1);
    std::vector<CompareRow> rows;
    for (const auto& m : cfg.orders) {
        const MultiField G = observableField(cfg, grid, m);
        std::vector<EvolutionReport> reps;
        std::string error;
        try {
            reps = evolveDualGrid(ops, G, times, p);
        } catch (const HorizonError& e) {
            error = e.what();
        }
        for (std::size_t j = 0; j < times.size(); ++j) {
            CompareRow r;
            r.order = m;
            r.t = times[j];
            const double t = times[j];
            r.mc = meanWithError(perPath(traces, [&](const EventTrace& tr) {
                return observableValue(th0, th1, m, sampleAt(tr, t));
            }));
            if (!error.empty()) {
                r.error = error;
            } else {
                const DualExpectation e = pairWithBudget(ops, k0, reps[j]);
                r.dual = e.value;
                r.budget = e.budget();
                r.z = r.mc.se > 0 ? (r.dual - r.mc.value) / r.mc.se : 0.0;
            }
            rows.push_back(r);
        }
    }
    return rows;
}

RunResult runExperiment(const ExperimentConfig& cfg, const std::string& outDir, const std::vector<std::string>& gates,
                        bool echo) {
    const fs::path dir(outDir);
    fs::create_directories(dir / "reports");
    RunLog log((dir / "run.log").string(), echo);
    log(versionStamp() + ": run started, gates:" + [&] {
        std::string s;
        for (const auto& g : gates) s += " " + g;
        return s;
    }());
    {
        std::ofstream(dir / "config.resolved.ini") << serializeConfig(cfg);
        std::ofstream(dir / "VERSION") << versionStamp() << "\n";
    }
    Context cx{cfg, dir, log, cfg.kernels(), {}, false};
    writeConstants(dir / "constants.json", cfg, cx.ks);
    RunResult result;
    result.dir = dir.string();
    for (const auto& name : gates) {
        log("gate " + name);
        GateResult g;
        try {
            if (name == "audit") g = gateAudit(cx);
            else if (name == "identities") g = gateIdentities(cx);
            else if (name == "moments") g = gateMoments(cx);
            else if (name == "compare") g = gateCompare(cx);
            else if (name == "ruelle") g = gateRuelle(cx);
            else if (name == "martingale") g = gateMartingale(cx);
            else if (name == "chentsov") g = gateChentsov(cx);
            else if (name == "sigma-sweep") g = gateSigma(cx);
            else if (name == "dual") g = gateDual(cx);
            else if (name == "free-oracle") g = gateFreeOracle(cx);
            else g = {name, false, "unknown gate"};
        } catch (const std::exception& e) {
            g = {name, false, std::string("error: ") + e.what()};
        }
        log("gate " + g.name + (g.pass ? " PASS " : " FAIL ") + g.detail);
        result.gates.push_back(g);
    }
    {
        Csv csv(dir / "reports" / "summary.csv", "requested gates", {"gate", "pass", "detail"});
        for (const auto& g : result.gates) csv.row({g.name, g.pass ? "1" : "0", "\"" + g.detail + "\""});
    }
    writeManifest(dir);
    log(std::string("run finished: ") + (result.pass() ? "all gates pass" : "some gates fail"));
    return result;
}

std::vector<std::string> emitPlots(const std::string& runDir) {
    const fs::path dir(runDir);
    if (!fs::exists(dir / "config.resolved.ini")) throw std::runtime_error("not a run directory: " + runDir);
    std::ifstream cin_(dir / "config.resolved.ini");
    std::stringstream ss;
    ss << cin_.rdbuf();
    const ExperimentConfig cfg = parseConfig(ss.str());
    const Domain dom = cfg.domain();
    fs::create_directories(dir / "plots");
    std::vector<std::string> written;

    {
        const fs::path out = dir / "plots" / "radial_profile.csv";
        Csv csv(out, "radial cross-type pair correlation g01(r) = k11/(k10 k01) from forward fields",
                {"t", "r", "g01"});
        std::vector<fs::path> fields;
        if (fs::exists(dir / "fields"))
            for (const auto& e : fs::directory_iterator(dir / "fields"))
                if (e.path().filename().string().rfind("forward_t", 0) == 0) fields.push_back(e.path());
        std::vector<std::pair<double, MultiField>> loaded;
        for (const auto& f : fields) {
            std::ifstream in(f, std::ios::binary);
            std::string label;
            MultiField k = readField(in, dom, nullptr, &label);
            if (k.maxOrder() < 2) continue;
            loaded.emplace_back(dbl(label.substr(label.find("t=") + 2)), std::move(k));
        }
        std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [t, k] : loaded) {
            const TorusGrid& grid = k.grid();
            const std::size_t N = grid.nodes();
            std::map<long, std::pair<double, int>> bins;
            const auto& k10 = k.at({1, 0});
            const auto& k01 = k.at({0, 1});
            const auto& k11 = k.at({1, 1});
            for (std::size_t a = 0; a < N; ++a)
                for (std::size_t b = 0; b < N; ++b) {
                    const double r = dom.dist(grid.node(a), grid.node(b));
                    const long key = std::lround(r / grid.h() * 4);
                    auto& slot = bins[key];
                    slot.first += k11[a * N + b] / (k10[a] * k01[b]);
                    slot.second += 1;
                }
            for (const auto& [key, s] : bins) csv.row({num(t), num(key * grid.h() / 4), num(s.first / s.second)});
        }
        written.push_back(out.string());
    }
    {
        const fs::path out = dir / "plots" / "chentsov.csv";
        Csv csv(out, "Chentsov scaling points and fitted log-log slope", {"kind", "spacing", "w", "w_lo", "w_hi", "slope"});
        for (const auto& r : readCsv(dir / "reports" / "chentsov.csv")) {
            if (r.empty()) continue;
            if (r[0] == "fit") {
                csv.row({"fit", "", "", "", "", r.size() > 3 ? r[3] : ""});
            } else {
                const double w = dbl(r[1]), se = dbl(r[2]);
                csv.row({"point", r[0], r[1], num(w - 1.96 * se), num(w + 1.96 * se), ""});
            }
        }
        written.push_back(out.string());
    }
    {
        const fs::path out = dir / "plots" / "sigma_sweep.csv";
        Csv csv(out, "sigma-approximation curves with 95% intervals",
                {"sigma", "mean", "mean_lo", "mean_hi", "difference", "difference_lo", "difference_hi"});
        for (const auto& r : readCsv(dir / "reports" / "sigma_sweep.csv")) {
            if (r.size() < 5) continue;
            const double m = dbl(r[1]), ms = dbl(r[2]), d = dbl(r[3]), ds = dbl(r[4]);
            csv.row({r[0], r[1], num(m - 1.96 * ms), num(m + 1.96 * ms), r[3], num(d - 1.96 * ds), num(d + 1.96 * ds)});
        }
        written.push_back(out.string());
    }
    return written;
}

}  // namespace wr
