#include "epiquota/scenario.hpp"

#include "epiquota/io.hpp"
#include "epiquota/rt.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace epiquota {

using nlohmann::json;

namespace {

void require_rate(double value, const char* field) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw InputError(field, fmt::format("{} outside [0, 1]", value));
    }
}

void require_positive(double value, const std::string& field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InputError(field, fmt::format("{} must be positive", value));
    }
}

// Walks a JSON object, rejecting unknown keys and reporting dotted paths.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw InputError(path_, "expected an object");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const {
        seen_.insert(key);
        return node_.contains(key);
    }

    const json& at(const std::string& key) const {
        seen_.insert(key);
        if (!node_.contains(key)) {
            throw InputError(field(key), "missing");
        }
        return node_.at(key);
    }

    double number(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number()) {
            throw InputError(field(key), "expected a number");
        }
        return v.get<double>();
    }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    long long integer(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer()) {
            throw InputError(field(key), "expected an integer");
        }
        return v.get<long long>();
    }

    long long integer_or(const std::string& key, long long fallback) const {
        return has(key) ? integer(key) : fallback;
    }

    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) {
            throw InputError(field(key), "expected a string");
        }
        return v.get<std::string>();
    }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) {
                throw InputError(field(key), "unknown key");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

EpidemicState read_state(const json& node, const std::string& path) {
    Reader r(node, path);
    EpidemicState st{r.number("S"), r.number("I"), r.number("H"), r.number("R")};
    r.finish();
    st.validate(path);
    return st;
}

DiseaseParams read_disease(const json& node) {
    Reader r(node, "disease");
    DiseaseParams d;
    d.gamma = r.number("gamma");
    d.theta = r.number("theta");
    d.delta = r.number("delta");
    d.beta0 = r.number("beta0");
    d.effective_infectious_period = r.number("effective_infectious_period");
    const bool by_moments = r.has("si_mean") || r.has("si_sd");
    const bool by_shape = r.has("si_shape") || r.has("si_scale");
    if (by_moments && by_shape) {
        throw InputError("disease.si_shape", "give either si_mean/si_sd or si_shape/si_scale, not both");
    }
    if (by_shape) {
        const double shape = r.number("si_shape");
        const double scale = r.number("si_scale");
        require_positive(shape, "disease.si_shape");
        require_positive(scale, "disease.si_scale");
        d.si_mean = shape * scale;
        d.si_sd = std::sqrt(shape) * scale;
    } else {
        d.si_mean = r.number_or("si_mean", d.si_mean);
        d.si_sd = r.number_or("si_sd", d.si_sd);
    }
    d.si_max = r.number_or("si_max", 0.0);
    r.finish();
    d.validate();
    return d;
}

ObjectiveParams read_objectives(const json& node, std::size_t divisions) {
    Reader r(node, "objectives");
    ObjectiveParams o;
    const json& k = r.at("k");
    if (k.is_number()) {
        o.k.assign(divisions, k.get<double>());
    } else if (k.is_array()) {
        for (const auto& v : k) {
            if (!v.is_number()) {
                throw InputError("objectives.k", "expected numbers");
            }
            o.k.push_back(v.get<double>());
        }
    } else {
        throw InputError("objectives.k", "expected a number or an array");
    }
    o.h0 = r.number("h0");
    o.l0 = r.number("l0");
    o.lambda = r.number("lambda");
    r.finish();
    o.validate(divisions);
    return o;
}

ControlParams read_control(const json& node) {
    Reader r(node, "control");
    ControlParams c;
    c.time_threshold = static_cast<int>(r.integer_or("time_threshold", c.time_threshold));
    c.lockdown_threshold = r.number_or("lockdown_threshold", c.lockdown_threshold);
    c.breach_fraction = r.number_or("breach_fraction", c.breach_fraction);
    c.breach_penalty = r.number_or("breach_penalty", c.breach_penalty);
    c.expert_hosp_threshold = r.number_or("expert_hosp_threshold", c.expert_hosp_threshold);
    c.expert_loss_threshold = r.number_or("expert_loss_threshold", c.expert_loss_threshold);
    c.max_steps = static_cast<int>(r.integer_or("max_steps", c.max_steps));
    c.rt_lag = static_cast<int>(r.integer_or("rt_lag", c.rt_lag));
    r.finish();
    c.validate();
    return c;
}

OdSource read_od_source(const json& node, std::size_t divisions) {
    Reader r(node, "od_source");
    OdSource od;
    const std::string kind = r.string("kind");
    if (kind == "gravity") {
        od.kind = OdSource::Kind::gravity;
        od.trip_rate = r.number("trip_rate");
        od.exponent = r.number_or("exponent", od.exponent);
        od.noise_sigma = r.number_or("noise_sigma", 0.0);
        od.days = static_cast<int>(r.integer_or("days", od.days));
        const json& dist = r.at("distances_km");
        if (!dist.is_array() || dist.size() != divisions) {
            throw InputError("od_source.distances_km", fmt::format("expected a {}x{} matrix", divisions, divisions));
        }
        for (const auto& row : dist) {
            if (!row.is_array() || row.size() != divisions) {
                throw InputError("od_source.distances_km",
                                 fmt::format("expected a {}x{} matrix", divisions, divisions));
            }
            od.distances_km.push_back(row.get<std::vector<double>>());
        }
        if (!(od.trip_rate >= 0.0)) {
            throw InputError("od_source.trip_rate", "must be non-negative");
        }
        if (!(od.noise_sigma >= 0.0)) {
            throw InputError("od_source.noise_sigma", "must be non-negative");
        }
        if (od.days < 1) {
            throw InputError("od_source.days", "must be at least 1");
        }
    } else if (kind == "csv") {
        od.kind = OdSource::Kind::csv;
        od.path = r.string("path");
    } else {
        throw InputError("od_source.kind", fmt::format("unknown kind '{}'", kind));
    }
    r.finish();
    return od;
}

}  // namespace

void EpidemicState::validate(const std::string& field) const {
    const std::pair<double, const char*> parts[] = {{s, "S"}, {i, "I"}, {h, "H"}, {r, "R"}};
    for (const auto& [value, name] : parts) {
        if (!std::isfinite(value) || value < 0.0) {
            throw InputError(field + "." + name, fmt::format("{} must be a finite non-negative count", value));
        }
    }
}

void DiseaseParams::validate() const {
    require_rate(gamma, "disease.gamma");
    require_rate(theta, "disease.theta");
    require_rate(delta, "disease.delta");
    require_rate(beta0, "disease.beta0");
    require_positive(effective_infectious_period, "disease.effective_infectious_period");
    require_positive(si_mean, "disease.si_mean");
    require_positive(si_sd, "disease.si_sd");
    if (si_max != 0.0) {
        require_positive(si_max, "disease.si_max");
        if (si_max < si_mean) {
            throw InputError("disease.si_max", "must be at least si_mean");
        }
    }
    try {
        (void)rt::SerialInterval::from_disease(*this);
    } catch (const InputError& e) {
        throw InputError("disease." + e.field(), e.what());
    }
}

void ObjectiveParams::validate(std::size_t divisions) const {
    if (k.size() != divisions) {
        throw InputError("objectives.k", fmt::format("expected {} values, got {}", divisions, k.size()));
    }
    for (double v : k) {
        require_positive(v, "objectives.k");
    }
    require_positive(h0, "objectives.h0");
    require_positive(l0, "objectives.l0");
    require_rate(lambda, "objectives.lambda");
}

void ControlParams::validate() const {
    if (time_threshold < 1) {
        throw InputError("control.time_threshold", "must be at least 1");
    }
    require_positive(lockdown_threshold, "control.lockdown_threshold");
    require_rate(breach_fraction, "control.breach_fraction");
    if (!(breach_penalty >= 0.0)) {
        throw InputError("control.breach_penalty", "must be non-negative");
    }
    require_positive(expert_hosp_threshold, "control.expert_hosp_threshold");
    require_positive(expert_loss_threshold, "control.expert_loss_threshold");
    if (max_steps < 1) {
        throw InputError("control.max_steps", "must be at least 1");
    }
    if (rt_lag < -1) {
        throw InputError("control.rt_lag", "must be -1 (derived) or non-negative");
    }
}

std::vector<EpidemicState> Scenario::initial_states() const {
    std::vector<EpidemicState> out;
    out.reserve(divisions.size());
    for (const auto& d : divisions) {
        out.push_back(d.initial);
    }
    return out;
}

std::vector<double> Scenario::populations() const {
    std::vector<double> out;
    out.reserve(divisions.size());
    for (const auto& d : divisions) {
        out.push_back(d.initial.total());
    }
    return out;
}

void Scenario::validate() const {
    if (divisions.empty()) {
        throw InputError("divisions", "at least one division required");
    }
    for (std::size_t k = 0; k < divisions.size(); ++k) {
        const auto path = fmt::format("divisions[{}]", k);
        if (divisions[k].id.index != k) {
            throw InputError(path + ".id", "ids must be 0..K-1");
        }
        divisions[k].initial.validate(path + ".initial");
        if (!(divisions[k].beds_per_1000 > 0.0)) {
            throw InputError(path + ".beds_per_1000", "must be positive");
        }
    }
    disease.validate();
    objectives.validate(divisions.size());
    control.validate();
    if (horizon < 1) {
        throw InputError("horizon", "must be at least 1");
    }
}

Scenario scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
    Reader top(doc, "");
    Scenario sc;
    sc.base_dir = base_dir;

    const json& divs = top.at("divisions");
    if (!divs.is_array() || divs.empty()) {
        throw InputError("divisions", "expected a non-empty array");
    }
    std::set<long long> ids;
    for (std::size_t k = 0; k < divs.size(); ++k) {
        const auto path = fmt::format("divisions[{}]", k);
        Reader r(divs[k], path);
        Division d;
        const long long id = r.integer("id");
        if (id < 0 || id >= static_cast<long long>(divs.size()) || !ids.insert(id).second) {
            throw InputError(path + ".id", fmt::format("{} is not a unique index in [0, {})", id, divs.size()));
        }
        d.id = DivisionId{static_cast<std::size_t>(id)};
        d.name = r.has("name") ? r.string("name") : fmt::format("division-{}", id);
        d.initial = read_state(r.at("initial"), path + ".initial");
        d.beds_per_1000 = r.number_or("beds_per_1000", d.beds_per_1000);
        r.finish();
        sc.divisions.push_back(std::move(d));
    }
    std::sort(sc.divisions.begin(), sc.divisions.end(),
              [](const Division& a, const Division& b) { return a.id < b.id; });

    sc.disease = read_disease(top.at("disease"));
    sc.objectives = read_objectives(top.at("objectives"), sc.divisions.size());
    if (top.has("control")) {
        sc.control = read_control(top.at("control"));
    }
    sc.horizon = static_cast<int>(top.integer("horizon"));
    const json& seed = top.at("seed");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        throw InputError("seed", "expected a non-negative integer");
    }
    sc.seed = seed.get<std::uint64_t>();
    sc.od_source = read_od_source(top.at("od_source"), sc.divisions.size());
    top.finish();
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(path.string(), fmt::format("not valid JSON: {}", e.what()));
    }
    return scenario_from_json(doc, path.parent_path());
}

json scenario_to_json(const Scenario& sc) {
    json divs = json::array();
    for (const auto& d : sc.divisions) {
        divs.push_back({{"id", d.id.index},
                        {"name", d.name},
                        {"initial", {{"S", d.initial.s}, {"I", d.initial.i}, {"H", d.initial.h}, {"R", d.initial.r}}},
                        {"beds_per_1000", d.beds_per_1000}});
    }
    json disease = {{"gamma", sc.disease.gamma},
                    {"theta", sc.disease.theta},
                    {"delta", sc.disease.delta},
                    {"beta0", sc.disease.beta0},
                    {"effective_infectious_period", sc.disease.effective_infectious_period},
                    {"si_mean", sc.disease.si_mean},
                    {"si_sd", sc.disease.si_sd}};
    if (sc.disease.si_max != 0.0) {
        disease["si_max"] = sc.disease.si_max;
    }
    json control = {{"time_threshold", sc.control.time_threshold},
                    {"lockdown_threshold", sc.control.lockdown_threshold},
                    {"breach_fraction", sc.control.breach_fraction},
                    {"breach_penalty", sc.control.breach_penalty},
                    {"expert_hosp_threshold", sc.control.expert_hosp_threshold},
                    {"expert_loss_threshold", sc.control.expert_loss_threshold},
                    {"max_steps", sc.control.max_steps},
                    {"rt_lag", sc.control.rt_lag}};
    json od;
    if (sc.od_source.kind == OdSource::Kind::gravity) {
        od = {{"kind", "gravity"},
              {"trip_rate", sc.od_source.trip_rate},
              {"exponent", sc.od_source.exponent},
              {"noise_sigma", sc.od_source.noise_sigma},
              {"days", sc.od_source.days},
              {"distances_km", sc.od_source.distances_km}};
    } else {
        od = {{"kind", "csv"}, {"path", sc.od_source.path.generic_string()}};
    }
    return {{"divisions", divs},
            {"disease", disease},
            {"objectives", {{"k", sc.objectives.k}, {"h0", sc.objectives.h0}, {"l0", sc.objectives.l0},
                            {"lambda", sc.objectives.lambda}}},
            {"control", control},
            {"horizon", sc.horizon},
            {"seed", sc.seed},
            {"od_source", od}};
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    io::write_file(path, scenario_to_json(scenario).dump(2) + "\n");
}

std::string scenario_hash(const Scenario& scenario) {
    std::string bytes = scenario_to_json(scenario).dump();
    if (scenario.od_source.kind == OdSource::Kind::csv) {
        bytes += '\0';
        bytes += io::read_file(scenario.base_dir / scenario.od_source.path);
    }
    return io::sha256_hex(bytes);
}

}  // namespace epiquota
