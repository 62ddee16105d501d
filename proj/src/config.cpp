#include "wr/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace wr {

ConfigError::ConfigError(int line, const std::string& msg)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line(line) {}

std::string toString(JumpFamily f) {
    switch (f) {
        case JumpFamily::Gaussian: return "gaussian";
        case JumpFamily::Exponential: return "exponential";
        case JumpFamily::TopHat: return "top-hat";
    }
    return "?";
}

JumpFamily jumpFamilyFromString(const std::string& s) {
    if (s == "gaussian") return JumpFamily::Gaussian;
    if (s == "exponential") return JumpFamily::Exponential;
    if (s == "top-hat") return JumpFamily::TopHat;
    throw std::invalid_argument("unknown jump family '" + s + "'");
}

std::string toString(RepulsionFamily f) {
    switch (f) {
        case RepulsionFamily::Gaussian: return "gaussian";
        case RepulsionFamily::Exponential: return "exponential";
        case RepulsionFamily::HardCore: return "hard-core";
        case RepulsionFamily::Zero: return "zero";
    }
    return "?";
}

RepulsionFamily repulsionFamilyFromString(const std::string& s) {
    if (s == "gaussian") return RepulsionFamily::Gaussian;
    if (s == "exponential") return RepulsionFamily::Exponential;
    if (s == "hard-core") return RepulsionFamily::HardCore;
    if (s == "zero") return RepulsionFamily::Zero;
    throw std::invalid_argument("unknown repulsion family '" + s + "'");
}

std::string toString(ThetaFamily f) {
    switch (f) {
        case ThetaFamily::GaussianBump: return "gaussian-bump";
        case ThetaFamily::CosineBump: return "cosine-bump";
        case ThetaFamily::ScaledPsi: return "scaled-psi";
        case ThetaFamily::GaussianMixture: return "gaussian-mixture";
        case ThetaFamily::Tabulated: return "tabulated";
    }
    return "?";
}

namespace {

ThetaFamily thetaFamilyFromString(const std::string& s) {
    if (s == "gaussian-bump") return ThetaFamily::GaussianBump;
    if (s == "cosine-bump") return ThetaFamily::CosineBump;
    if (s == "scaled-psi") return ThetaFamily::ScaledPsi;
    throw std::invalid_argument("unsupported theta family '" + s + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parseDouble(const std::string& s) {
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

std::uint64_t parseUnsigned(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument("not a nonnegative integer: '" + s + "'");
    return v;
}

int parseInt(const std::string& s) {
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
    return v;
}

std::vector<std::string> splitOn(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::vector<double> parseList(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : splitOn(s, ',')) out.push_back(parseDouble(t));
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmtList(const std::vector<double>& v) {
    std::string out;
    for (std::size_t j = 0; j < v.size(); ++j) out += (j ? ", " : "") + fmt(v[j]);
    return out;
}

struct Key {
    std::string section, name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Key number(std::string sec, std::string name, T ExperimentConfig::*field) {
    return {std::move(sec), std::move(name),
            [field](ExperimentConfig& c, const std::string& v) {
                if constexpr (std::is_same_v<T, double>)
                    c.*field = parseDouble(v);
                else if constexpr (std::is_same_v<T, int>)
                    c.*field = parseInt(v);
                else
                    c.*field = parseUnsigned(v);
            },
            [field](const ExperimentConfig& c) {
                if constexpr (std::is_same_v<T, double>)
                    return fmt(c.*field);
                else
                    return std::to_string(c.*field);
            }};
}

void addJump(std::vector<Key>& keys, int i) {
    const std::string sec = "a" + std::to_string(i);
    keys.push_back({sec, "family", [i](ExperimentConfig& c, const std::string& v) { c.a[i].family = jumpFamilyFromString(v); },
                    [i](const ExperimentConfig& c) { return toString(c.a[i].family); }});
    keys.push_back({sec, "mass", [i](ExperimentConfig& c, const std::string& v) { c.a[i].mass = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.a[i].mass); }});
    keys.push_back({sec, "scale", [i](ExperimentConfig& c, const std::string& v) { c.a[i].scale = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.a[i].scale); }});
}

void addRepulsion(std::vector<Key>& keys, int i) {
    const std::string sec = "phi" + std::to_string(i);
    keys.push_back({sec, "family",
                    [i](ExperimentConfig& c, const std::string& v) { c.phi[i].family = repulsionFamilyFromString(v); },
                    [i](const ExperimentConfig& c) { return toString(c.phi[i].family); }});
    keys.push_back({sec, "amp", [i](ExperimentConfig& c, const std::string& v) { c.phi[i].amp = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.phi[i].amp); }});
    keys.push_back({sec, "scale", [i](ExperimentConfig& c, const std::string& v) { c.phi[i].scale = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.phi[i].scale); }});
}

void addTheta(std::vector<Key>& keys, int i) {
    const std::string p = "theta" + std::to_string(i) + "_";
    keys.push_back({"observable", p + "family",
                    [i](ExperimentConfig& c, const std::string& v) { c.theta[i].family = thetaFamilyFromString(v); },
                    [i](const ExperimentConfig& c) { return toString(c.theta[i].family); }});
    keys.push_back({"observable", p + "amp",
                    [i](ExperimentConfig& c, const std::string& v) { c.theta[i].amp = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.theta[i].amp); }});
    keys.push_back({"observable", p + "width",
                    [i](ExperimentConfig& c, const std::string& v) { c.theta[i].width = parseDouble(v); },
                    [i](const ExperimentConfig& c) { return fmt(c.theta[i].width); }});
    keys.push_back({"observable", p + "center",
                    [i](ExperimentConfig& c, const std::string& v) { c.theta[i].center = parseList(v); },
                    [i](const ExperimentConfig& c) { return fmtList(c.theta[i].center); }});
}

const std::vector<Key>& keyTable() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        k.push_back(number("domain", "d", &ExperimentConfig::d));
        k.push_back(number("domain", "L", &ExperimentConfig::L));
        k.push_back({"domain", "psi", [](ExperimentConfig& c, const std::string& v) { c.psi = psiModeFromString(v); },
                     [](const ExperimentConfig& c) { return toString(c.psi); }});
        addJump(k, 0);
        addJump(k, 1);
        addRepulsion(k, 0);
        addRepulsion(k, 1);
        k.push_back({"initial", "law", [](ExperimentConfig& c, const std::string& v) { c.law = v; },
                     [](const ExperimentConfig& c) { return c.law; }});
        k.push_back(number("initial", "kappa0", &ExperimentConfig::kappa0));
        k.push_back(number("initial", "kappa1", &ExperimentConfig::kappa1));
        k.push_back({"initial", "file", [](ExperimentConfig& c, const std::string& v) { c.file = v; },
                     [](const ExperimentConfig& c) { return c.file; }});
        k.push_back(number("dynamics", "sigma", &ExperimentConfig::sigma));
        k.push_back(number("dynamics", "t_end", &ExperimentConfig::tEnd));
        k.push_back(number("hierarchy", "M", &ExperimentConfig::M));
        k.push_back(number("hierarchy", "n", &ExperimentConfig::n));
        k.push_back(number("hierarchy", "nmax", &ExperimentConfig::nMax));
        k.push_back({"hierarchy", "closure",
                     [](ExperimentConfig& c, const std::string& v) { c.closure = closureFromString(v); },
                     [](const ExperimentConfig& c) { return toString(c.closure); }});
        k.push_back(number("hierarchy", "theta0", &ExperimentConfig::theta0));
        k.push_back(number("hierarchy", "safety", &ExperimentConfig::safety));
        k.push_back(number("hierarchy", "term_cap", &ExperimentConfig::termCap));
        k.push_back(number("run", "paths", &ExperimentConfig::paths));
        k.push_back(number("run", "seed", &ExperimentConfig::seed));
        k.push_back(number("run", "save_traces", &ExperimentConfig::saveTraces));
        k.push_back({"report", "checks", [](ExperimentConfig& c, const std::string& v) { c.checks = splitOn(v, ','); },
                     [](const ExperimentConfig& c) {
                         std::string out;
                         for (std::size_t j = 0; j < c.checks.size(); ++j) out += (j ? ", " : "") + c.checks[j];
                         return out;
                     }});
        k.push_back({"report", "times", [](ExperimentConfig& c, const std::string& v) { c.times = parseList(v); },
                     [](const ExperimentConfig& c) { return fmtList(c.times); }});
        k.push_back(number("report", "chentsov_center", &ExperimentConfig::chentsovCenter));
        k.push_back({"report", "chentsov_spacings",
                     [](ExperimentConfig& c, const std::string& v) { c.chentsovSpacings = parseList(v); },
                     [](const ExperimentConfig& c) { return fmtList(c.chentsovSpacings); }});
        k.push_back({"report", "sigmas", [](ExperimentConfig& c, const std::string& v) { c.sigmas = parseList(v); },
                     [](const ExperimentConfig& c) { return fmtList(c.sigmas); }});
        k.push_back(number("report", "sweep_time", &ExperimentConfig::sweepTime));
        k.push_back({"observable", "orders",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.orders.clear();
                         for (const auto& t : splitOn(v, ' ')) {
                             const auto parts = splitOn(t, ',');
                             if (parts.size() != 2) throw std::invalid_argument("order must read m0,m1: '" + t + "'");
                             c.orders.push_back({parseInt(parts[0]), parseInt(parts[1])});
                         }
                     },
                     [](const ExperimentConfig& c) {
                         std::string out;
                         for (std::size_t j = 0; j < c.orders.size(); ++j)
                             out += (j ? " " : "") + std::to_string(c.orders[j].m0) + "," +
                                    std::to_string(c.orders[j].m1);
                         return out;
                     }});
        addTheta(k, 0);
        addTheta(k, 1);
        return k;
    }();
    return keys;
}

const Key* findKey(const std::string& sec, const std::string& name) {
    for (const auto& k : keyTable())
        if (k.section == sec && k.name == name) return &k;
    return nullptr;
}

void validate(const ExperimentConfig& c, const std::map<std::string, int>& lines) {
    auto fail = [&](const std::string& key, const std::string& msg) {
        const auto it = lines.find(key);
        throw ConfigError(it == lines.end() ? 0 : it->second, key + ": " + msg);
    };
    if (c.d < 1 || c.d > kMaxDim) fail("domain.d", "dimension must be 1, 2 or 3");
    if (!(c.L > 0)) fail("domain.L", "side must be positive");
    for (int i = 0; i < 2; ++i) {
        const std::string a = "a" + std::to_string(i) + ".", p = "phi" + std::to_string(i) + ".";
        if (!(c.a[i].mass > 0)) fail(a + "mass", "must be positive");
        if (!(c.a[i].scale > 0)) fail(a + "scale", "must be positive");
        if (!(c.phi[i].amp >= 0)) fail(p + "amp", "must be nonnegative");
        if (!(c.phi[i].scale > 0)) fail(p + "scale", "must be positive");
        if (c.phi[i].family == RepulsionFamily::HardCore && !(2 * c.phi[i].scale < c.L))
            fail(p + "scale", "hard-core radius must satisfy 2r < L");
        const ThetaSpec& th = c.theta[i];
        const std::string o = "observable.theta" + std::to_string(i) + "_";
        if (!(th.amp >= 0)) fail(o + "amp", "must be nonnegative");
        if (!(th.width > 0)) fail(o + "width", "must be positive");
        if (!th.center.empty() && int(th.center.size()) != c.d) fail(o + "center", "needs d coordinates");
    }
    if (c.law != "poisson" && c.law != "file") fail("initial.law", "must be poisson or file");
    if (c.law == "file" && c.file.empty()) fail("initial.file", "required when law = file");
    if (!(c.kappa0 >= 0) || !(c.kappa1 >= 0)) fail("initial.kappa0", "intensities must be nonnegative");
    if (!(c.sigma >= 0)) fail("dynamics.sigma", "must be nonnegative");
    if (!(c.tEnd > 0)) fail("dynamics.t_end", "must be positive");
    if (c.M < 1 || c.M > 4) fail("hierarchy.M", "stored order must be in 1..4");
    if (c.n < 4) fail("hierarchy.n", "grid needs at least 4 nodes per axis");
    if (c.nMax < 0) fail("hierarchy.nmax", "must be nonnegative");
    if (!(c.safety > 0 && c.safety <= 1)) fail("hierarchy.safety", "must lie in (0, 1]");
    if (c.termCap < 1) fail("hierarchy.term_cap", "must be positive");
    if (c.paths < 1) fail("run.paths", "at least one path");
    const auto& known = knownChecks();
    for (const auto& g : c.checks)
        if (std::find(known.begin(), known.end(), g) == known.end()) fail("report.checks", "unknown check '" + g + "'");
    for (double t : c.times)
        if (!(t >= 0 && t <= c.tEnd)) fail("report.times", "times must lie in [0, t_end]");
    if (!std::is_sorted(c.times.begin(), c.times.end())) fail("report.times", "times must be increasing");
    if (c.chentsovSpacings.size() < 2) fail("report.chentsov_spacings", "at least two spacings");
    for (double s : c.chentsovSpacings)
        if (!(s > 0) || c.chentsovCenter - s / 2 < 0 || c.chentsovCenter + s / 2 > c.tEnd)
            fail("report.chentsov_spacings", "windows must fit inside [0, t_end]");
    for (double s : c.sigmas)
        if (!(s > 0)) fail("report.sigmas", "must be positive");
    if (!(c.sweepTime >= 0 && c.sweepTime <= c.tEnd)) fail("report.sweep_time", "must lie in [0, t_end]");
    for (const auto& m : c.orders)
        if (m.m0 < 0 || m.m1 < 0 || m.total() < 1 || m.total() > std::min(c.M, 3))
            fail("observable.orders", "orders need 1 <= |m| <= min(M, 3)");
}

}  // namespace

Domain ExperimentConfig::domain() const { return Domain(d, L); }

KernelSet ExperimentConfig::kernels() const {
    const Domain dom = domain();
    return KernelSet(dom, {JumpKernel(dom, a[0].family, a[0].mass, a[0].scale), JumpKernel(dom, a[1].family, a[1].mass, a[1].scale)},
                     {RepulsionKernel(dom, phi[0].family, phi[0].amp, phi[0].scale),
                      RepulsionKernel(dom, phi[1].family, phi[1].amp, phi[1].scale)});
}

HierarchyParams ExperimentConfig::hierarchy() const {
    HierarchyParams p;
    p.M = M;
    p.n = n;
    p.nMax = nMax;
    p.closure = closure;
    p.theta0 = theta0;
    p.safety = safety;
    p.termCap = termCap;
    return p;
}

Theta ExperimentConfig::makeTheta(int i) const {
    const Domain dom = domain();
    const ThetaSpec& s = theta[i];
    Point c = dom.center();
    for (std::size_t k = 0; k < s.center.size(); ++k) c[k] = s.center[k];
    switch (s.family) {
        case ThetaFamily::GaussianBump: return Theta::gaussianBump(dom, psi, s.amp, s.width, c);
        case ThetaFamily::CosineBump: return Theta::cosineBump(dom, psi, s.amp, s.width, c);
        case ThetaFamily::ScaledPsi: return Theta::scaledPsi(dom, psi, s.amp);
        default: throw std::invalid_argument("unsupported theta family");
    }
}

InitialSampler ExperimentConfig::sampler() const {
    const Domain dom = domain();
    if (law == "file") {
        std::ifstream in(file);
        if (!in) throw ConfigError(0, "cannot open initial configuration '" + file + "'");
        Domain fd;
        const Configuration g = readConfiguration(in, &fd);
        if (fd.d != dom.d || fd.L != dom.L) throw ConfigError(0, "initial configuration domain differs from [domain]");
        return [g](CounterRng&) { return g; };
    }
    const double k0 = kappa0, k1 = kappa1;
    return [k0, k1, dom](CounterRng& r) { return samplePoissonInitial(k0, k1, dom, r); };
}

const std::vector<std::string>& knownChecks() {
    static const std::vector<std::string> names{"audit",      "identities", "moments",  "compare",
                                                "ruelle",     "martingale", "chentsov", "sigma-sweep",
                                                "dual",       "free-oracle"};
    return names;
}

ExperimentConfig parseConfig(const std::string& text) {
    ExperimentConfig c;
    std::map<std::string, int> lines;
    std::istringstream is(text);
    std::string raw, section;
    int lineNo = 0;
    while (std::getline(is, raw)) {
        ++lineNo;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(lineNo, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            const bool known = std::any_of(keyTable().begin(), keyTable().end(),
                                           [&](const Key& k) { return k.section == section; });
            if (!known) throw ConfigError(lineNo, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineNo, "expected key = value");
        if (section.empty()) throw ConfigError(lineNo, "key outside of a section");
        const std::string name = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        const Key* key = findKey(section, name);
        if (!key) throw ConfigError(lineNo, "unknown key '" + name + "' in [" + section + "]");
        const std::string full = section + "." + name;
        if (lines.count(full)) throw ConfigError(lineNo, "duplicate key '" + name + "' in [" + section + "]");
        lines[full] = lineNo;
        try {
            key->set(c, value);
        } catch (const std::exception& e) {
            throw ConfigError(lineNo, full + ": " + e.what());
        }
    }
    validate(c, lines);
    return c;
}

ExperimentConfig loadConfig(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c = parseConfig(ss.str());
    auto slash = path.find_last_of('/');
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    c.label = stem;
    return c;
}

std::string serializeConfig(const ExperimentConfig& c) {
    std::string out, section;
    for (const auto& k : keyTable()) {
        if (k.section != section) {
            out += (section.empty() ? "" : "\n") + ("[" + k.section + "]\n");
            section = k.section;
        }
        out += k.name + " = " + k.get(c) + "\n";
    }
    return out;
}

}  // namespace wr
