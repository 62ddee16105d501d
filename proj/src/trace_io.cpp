#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "wr/simulator.hpp"

namespace wr {

using nlohmann::json;

namespace {

json pointJson(const Domain& dom, const Point& p) {
    json a = json::array();
    for (int k = 0; k < dom.d; ++k) a.push_back(p[k]);
    return a;
}

Point pointFrom(const json& a) {
    Point p{};
    for (std::size_t k = 0; k < a.size() && k < std::size_t(kMaxDim); ++k) p[k] = a[k].get<double>();
    return p;
}

}  // namespace

void writeTrace(std::ostream& os, const EventTrace& tr, PsiMode mode) {
    json h;
    h["schema"] = kTraceSchema;
    h["d"] = tr.dom.d;
    h["L"] = tr.dom.L;
    h["psi"] = toString(mode);
    h["seed"] = tr.meta.seed;
    h["sigma"] = tr.meta.sigma;
    h["t_end"] = tr.tEnd;
    h["kernels"] = tr.meta.kernels;
    h["constants"] = {{"alpha", tr.meta.constants.alpha},   {"a_norm", tr.meta.constants.aNorm},
                      {"phibar", tr.meta.constants.phiBar}, {"c_a", tr.meta.constants.cA},
                      {"alphabar", tr.meta.constants.alphaBar}};
    h["tentative"] = tr.meta.tentative;
    h["accepted"] = tr.meta.accepted;
    json init = json::array();
    for (int i = 0; i < 2; ++i)
        for (const auto& p : tr.initial.type[i]) init.push_back({{"type", i}, {"id", p.id}, {"x", pointJson(tr.dom, p.x)}});
    h["initial"] = init;
    os << h.dump() << '\n';
    for (const auto& e : tr.events) {
        json r = {{"t", e.t}, {"type", e.type}, {"index", e.index}, {"id", e.id},
                  {"from", pointJson(tr.dom, e.from)}, {"to", pointJson(tr.dom, e.to)}};
        os << r.dump() << '\n';
    }
}

EventTrace readTrace(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("trace: missing header");
    json h = json::parse(line);
    if (!h.contains("schema") || h["schema"] != kTraceSchema) throw std::runtime_error("trace: unsupported schema");
    EventTrace tr;
    tr.dom = Domain(h["d"].get<int>(), h["L"].get<double>());
    tr.tEnd = h["t_end"].get<double>();
    tr.meta.seed = h["seed"].get<std::uint64_t>();
    tr.meta.sigma = h["sigma"].get<double>();
    tr.meta.kernels = h["kernels"].get<std::string>();
    tr.meta.tentative = h["tentative"].get<std::uint64_t>();
    tr.meta.accepted = h["accepted"].get<std::uint64_t>();
    const auto& c = h["constants"];
    tr.meta.constants.alpha = c["alpha"].get<double>();
    tr.meta.constants.aNorm = c["a_norm"].get<double>();
    tr.meta.constants.phiBar = c["phibar"].get<double>();
    tr.meta.constants.cA = c["c_a"].get<double>();
    tr.meta.constants.alphaBar = c["alphabar"].get<double>();
    for (const auto& p : h["initial"])
        tr.initial.type[p["type"].get<int>()].push_back({p["id"].get<std::uint64_t>(), pointFrom(p["x"])});
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json r = json::parse(line);
        Event e;
        e.t = r["t"].get<double>();
        e.type = r["type"].get<int>();
        e.index = r["index"].get<std::uint32_t>();
        e.id = r["id"].get<std::uint64_t>();
        e.from = pointFrom(r["from"]);
        e.to = pointFrom(r["to"]);
        tr.events.push_back(e);
    }
    return tr;
}

}  // namespace wr
