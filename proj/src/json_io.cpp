#include "qestlab/json_io.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace qestlab {

namespace {

std::vector<double> parse_params(const Json& j) {
    std::vector<double> params;
    if (j.contains("params") && j["params"].is_object()) {
        // Built-ins take at most one scalar parameter (r for qubit-phase).
        for (const auto& [key, value] : j["params"].items()) {
            if (value.is_number()) params.push_back(value.get<double>());
        }
    }
    return params;
}

} // namespace

Cmat parse_cmatrix(const Json& j) {
    if (!j.is_array() || j.empty()) throw InvalidConfig("matrix literal: expected array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Cmat m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw InvalidConfig("matrix literal: ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            const Json& e = j[r][c];
            if (!e.is_array() || e.size() != 2)
                throw InvalidConfig("matrix literal: entries are [re, im] pairs");
            m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    }
    return m;
}

Json emit_cmatrix(const Cmat& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
        rows.push_back(std::move(row));
    }
    return rows;
}

Rmat parse_rmatrix(const Json& j) {
    if (!j.is_array() || j.empty()) throw InvalidConfig("real matrix: expected array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Rmat m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw InvalidConfig("real matrix: ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Json emit_rmatrix(const Rmat& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

ParameterRegion parse_region(const Json& j) {
    ParameterRegion region;
    if (!j.contains("box") || !j["box"].is_array())
        throw InvalidConfig("region: missing box");
    region.m = static_cast<int>(j["box"].size());
    for (const auto& pair : j["box"]) {
        if (!pair.is_array() || pair.size() != 2)
            throw InvalidConfig("region: box entries are [lo, hi]");
        region.box.emplace_back(pair[0].get<double>(), pair[1].get<double>());
        if (region.box.back().first >= region.box.back().second)
            throw InvalidConfig("region: lo must be < hi");
    }
    region.margin = j.value("margin", 1e-3);
    return region;
}

StateModel load_state_model(const Json& j) {
    StateModel model;
    if (j.contains("grid")) {
        const Json& g = j["grid"];
        if (!g.contains("thetas") || !g.contains("states"))
            throw InvalidConfig("grid model: thetas and states required");
        std::vector<double> thetas = g["thetas"].get<std::vector<double>>();
        std::vector<DensityOperator> states;
        for (const auto& s : g["states"]) states.emplace_back(parse_cmatrix(s));
        model = grid_state_model(thetas, states, j.contains("region")
                                                     ? parse_region(j["region"]).margin
                                                     : 1e-3);
    } else if (j.contains("poly")) {
        if (!j.contains("region"))
            throw InvalidConfig("poly model: region required");
        std::vector<Cmat> coeffs;
        for (const auto& c : j["poly"]["coeffs"]) coeffs.push_back(parse_cmatrix(c));
        model = poly_state_model(coeffs, parse_region(j["region"]));
    } else if (j.contains("name")) {
        const std::string name = j["name"].get<std::string>();
        if (name == "product") {
            if (!j.contains("params") || !j["params"].contains("a") ||
                !j["params"].contains("b"))
                throw InvalidConfig("product model: params.a and params.b required");
            model = product_model(load_state_model(j["params"]["a"]),
                                  load_state_model(j["params"]["b"]));
        } else {
            model = builtin_state_model(name, parse_params(j));
        }
    } else {
        throw InvalidConfig("model config: name or grid required");
    }
    if (j.contains("region")) model.region = parse_region(j["region"]);
    return model;
}

ChannelModel load_channel_model(const Json& j) {
    if (!j.contains("name")) throw InvalidConfig("channel config: name required");
    ChannelModel model = builtin_channel_model(j["name"].get<std::string>(), parse_params(j));
    if (j.contains("region")) model.region = parse_region(j["region"]);
    return model;
}

Povm load_povm(const Json& j) {
    if (!j.contains("elements")) throw InvalidConfig("povm config: elements required");
    std::vector<Cmat> elements;
    for (const auto& e : j["elements"]) elements.push_back(parse_cmatrix(e));
    return Povm(std::move(elements));
}

namespace {

Instrument load_instrument(const Json& j) {
    if (j.contains("lueders")) {
        std::vector<Cmat> elements;
        for (const auto& e : j["lueders"]) elements.push_back(parse_cmatrix(e));
        return Instrument::lueders(Povm(std::move(elements)));
    }
    if (j.contains("kraus_branches")) {
        std::vector<Instrument::Branch> branches;
        int label = 0;
        for (const auto& branch : j["kraus_branches"]) {
            Instrument::Branch b;
            b.label = label++;
            for (const auto& k : branch) b.kraus.push_back(parse_cmatrix(k));
            branches.push_back(std::move(b));
        }
        return Instrument(std::move(branches));
    }
    throw InvalidConfig("instrument: lueders or kraus_branches required");
}

bool history_matches(const std::string& pattern, const std::vector<int>& history) {
    if (pattern.empty() || pattern == "*") return true;
    std::stringstream ss(pattern);
    std::string tok;
    std::size_t i = 0;
    while (std::getline(ss, tok, ',')) {
        if (tok == "*") return true; // trailing wildcard
        if (i >= history.size()) return false;
        if (std::stoi(tok) != history[i]) return false;
        ++i;
    }
    return i == history.size();
}

} // namespace

ScheduleConfig load_schedule(const Json& j) {
    ScheduleConfig cfg;
    cfg.schedule.n_samples = j.value("n_samples", 1);
    cfg.schedule.rounds = j.value("rounds", 1);
    if (!j.contains("instruments") || !j.contains("table"))
        throw InvalidConfig("schedule config: instruments and table required");

    auto instruments = std::make_shared<std::map<std::string, Instrument>>();
    for (const auto& [name, inst] : j["instruments"].items())
        instruments->emplace(name, load_instrument(inst));

    struct Row {
        int round, sample; // 1-based in config, -1 = any
        std::string history;
        std::string use;
    };
    auto rows = std::make_shared<std::vector<Row>>();
    for (const auto& r : j["table"]) {
        Row row;
        row.round = r.value("round", -1);
        row.sample = r.value("sample", -1);
        row.history = r.value("history", std::string("*"));
        row.use = r.at("use").get<std::string>();
        if (!instruments->count(row.use))
            throw InvalidConfig("schedule table: unknown instrument " + row.use);
        rows->push_back(std::move(row));
    }
    cfg.schedule.choose_fn = [instruments, rows](int r, int kappa,
                                                 const std::vector<int>& history) {
        for (const auto& row : *rows) {
            if (row.round >= 0 && row.round != r + 1) continue;
            if (row.sample >= 0 && row.sample != kappa + 1) continue;
            if (!history_matches(row.history, history)) continue;
            return instruments->at(row.use);
        }
        throw InvalidConfig("schedule table: no row matches round " + std::to_string(r + 1) +
                            ", sample " + std::to_string(kappa + 1));
    };

    if (j.contains("estimator")) {
        auto table = std::make_shared<std::map<std::vector<int>, Rvec>>();
        for (const auto& entry : j["estimator"]["values"]) {
            std::vector<int> path;
            std::stringstream ss(entry.at("path").get<std::string>());
            std::string tok;
            while (std::getline(ss, tok, ',')) path.push_back(std::stoi(tok));
            const auto value = entry.at("value").get<std::vector<double>>();
            Rvec v(value.size());
            for (std::size_t i = 0; i < value.size(); ++i) v[i] = value[i];
            (*table)[path] = v;
        }
        cfg.value_fn = [table](const std::vector<int>& labels) {
            const auto it = table->find(labels);
            if (it == table->end())
                throw InvalidConfig("schedule estimator: no value for outcome path");
            return it->second;
        };
    }
    return cfg;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace qestlab
