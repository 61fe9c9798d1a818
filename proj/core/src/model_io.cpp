#include "airls/model_io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "airls/densities.hpp"

namespace airls {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument("model json: " + where + ": " + what);
}

void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "expected an object");
}

void expect_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : keys) {
            if (key == k) {
                known = true;
                break;
            }
        }
        if (!known) fail(where, "unknown field '" + key + "'");
    }
}

double read_number(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) fail(where, std::string("missing field '") + key + "'");
    const json& v = j.at(key);
    if (!v.is_number()) fail(where, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

Density parse_density(const json& j, const std::string& where) {
    expect_object(j, where);
    if (!j.contains("type") || !j.at("type").is_string()) {
        fail(where, "density needs a string 'type'");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "gnd") {
        expect_keys(j, where, {"type", "q", "scale"});
        const double q = read_number(j, where, "q");
        if (!(q > 0.0)) fail(where, "'q' must be positive");
        if (j.contains("scale")) {
            const double scale = read_number(j, where, "scale");
            if (!(scale > 0.0)) fail(where, "'scale' must be positive");
            return ScaledGND{q, scale};
        }
        return StandardGND{q};
    }
    if (type == "asym_laplace") {
        expect_keys(j, where, {"type", "rate_pos", "rate_neg"});
        const double a = read_number(j, where, "rate_pos");
        const double b = read_number(j, where, "rate_neg");
        if (!(a > 0.0) || !(b > 0.0)) fail(where, "rates must be positive");
        return AsymmetricLaplace{a, b};
    }
    if (type == "flat") {
        expect_keys(j, where, {"type"});
        return NonInformative{};
    }
    fail(where, "unknown density type '" + type + "' (expected gnd, asym_laplace, or flat)");
}

json density_to_json(const Density& density) {
    if (const auto* g = std::get_if<StandardGND>(&density)) {
        return json{{"type", "gnd"}, {"q", g->q}};
    }
    if (const auto* g = std::get_if<ScaledGND>(&density)) {
        return json{{"type", "gnd"}, {"q", g->q}, {"scale", g->scale}};
    }
    if (const auto* a = std::get_if<AsymmetricLaplace>(&density)) {
        return json{{"type", "asym_laplace"}, {"rate_pos", a->rate_pos}, {"rate_neg", a->rate_neg}};
    }
    if (std::holds_alternative<NonInformative>(density)) {
        return json{{"type", "flat"}};
    }
    throw std::invalid_argument(
        "model json: programmatic custom densities have no JSON representation");
}

Eigen::VectorXd parse_vector(const json& j, const std::string& where) {
    if (!j.is_array()) fail(where, "expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    Eigen::Index i = 0;
    for (const auto& e : j) {
        if (!e.is_number()) fail(where, "expected an array of numbers");
        v[i++] = e.get<double>();
    }
    return v;
}

}  // namespace

ModelDocument parse_model(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("model json: not valid JSON: ") + e.what());
    }
    expect_object(root, "document");
    expect_keys(root, "document", {"blocks", "qbar", "factors", "x_init", "metadata"});

    ModelDocument doc;
    MultiaffineModel& model = doc.model;

    if (!root.contains("blocks") || !root.at("blocks").is_array() || root.at("blocks").empty()) {
        fail("document", "'blocks' must be a non-empty array");
    }
    std::map<std::string, int> block_by_name;
    int idx = 0;
    for (const auto& bj : root.at("blocks")) {
        const std::string where = "blocks[" + std::to_string(idx) + "]";
        expect_object(bj, where);
        expect_keys(bj, where, {"name", "size"});
        if (!bj.contains("name") || !bj.at("name").is_string()) {
            fail(where, "needs a string 'name'");
        }
        const std::string name = bj.at("name").get<std::string>();
        const double size_raw = read_number(bj, where, "size");
        const int size = static_cast<int>(size_raw);
        if (static_cast<double>(size) != size_raw || size < 1) {
            fail(where, "'size' must be a positive integer");
        }
        if (!block_by_name.emplace(name, idx).second) {
            fail(where, "duplicate block name '" + name + "'");
        }
        model.blocks.push_back({name, size});
        ++idx;
    }

    if (root.contains("qbar")) {
        if (!root.at("qbar").is_number()) fail("document", "'qbar' must be a number");
        const double qbar = root.at("qbar").get<double>();
        if (!(qbar > 0.0)) fail("document", "'qbar' must be positive");
        model.qbar = qbar;
    }

    if (!root.contains("factors") || !root.at("factors").is_array()) {
        fail("document", "'factors' must be an array");
    }
    int fi = 0;
    for (const auto& fj : root.at("factors")) {
        const std::string fwhere = "factors[" + std::to_string(fi) + "]";
        expect_object(fj, fwhere);
        expect_keys(fj, fwhere, {"terms", "density"});
        if (!fj.contains("terms") || !fj.at("terms").is_array() || fj.at("terms").empty()) {
            fail(fwhere, "'terms' must be a non-empty array");
        }
        ModelFactor factor;
        int ti = 0;
        for (const auto& tj : fj.at("terms")) {
            const std::string twhere = fwhere + ".terms[" + std::to_string(ti) + "]";
            expect_object(tj, twhere);
            expect_keys(tj, twhere, {"coeff", "factors"});
            ResidualTerm term;
            term.coeff = read_number(tj, twhere, "coeff");
            if (tj.contains("factors")) {
                if (!tj.at("factors").is_array()) fail(twhere, "'factors' must be an array");
                int li = 0;
                for (const auto& lj : tj.at("factors")) {
                    const std::string lwhere = twhere + ".factors[" + std::to_string(li) + "]";
                    expect_object(lj, lwhere);
                    expect_keys(lj, lwhere, {"block", "vector"});
                    if (!lj.contains("block") || !lj.at("block").is_string()) {
                        fail(lwhere, "needs a string 'block'");
                    }
                    const std::string bname = lj.at("block").get<std::string>();
                    const auto bit = block_by_name.find(bname);
                    if (bit == block_by_name.end()) {
                        fail(lwhere, "references unknown block '" + bname + "'");
                    }
                    if (!lj.contains("vector")) fail(lwhere, "missing 'vector'");
                    Eigen::VectorXd vec = parse_vector(lj.at("vector"), lwhere + ".vector");
                    const int bsize = model.blocks[static_cast<std::size_t>(bit->second)].size;
                    if (vec.size() != bsize) {
                        fail(lwhere, "vector length " + std::to_string(vec.size()) +
                                         " does not match block '" + bname + "' size " +
                                         std::to_string(bsize));
                    }
                    term.factors.push_back({bit->second, std::move(vec)});
                    ++li;
                }
            }
            factor.terms.push_back(std::move(term));
            ++ti;
        }
        if (!fj.contains("density")) fail(fwhere, "missing 'density'");
        factor.density = parse_density(fj.at("density"), fwhere + ".density");
        model.factors.push_back(std::move(factor));
        ++fi;
    }

    if (root.contains("x_init")) {
        Eigen::VectorXd x = parse_vector(root.at("x_init"), "x_init");
        const int dim = total_dim(model);
        if (x.size() != dim) {
            fail("x_init", "length " + std::to_string(x.size()) + " does not match total dimension " +
                               std::to_string(dim));
        }
        doc.x_init = std::move(x);
    }

    if (root.contains("metadata")) {
        doc.metadata_json = root.at("metadata").dump();
    }

    validate_model(model);
    return doc;
}

ModelDocument load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw std::runtime_error("cannot read model file: " + path);
    return parse_model(buf.str());
}

std::string serialize_model(const ModelDocument& doc) {
    const MultiaffineModel& model = doc.model;
    json root;
    json blocks = json::array();
    for (const Block& b : model.blocks) {
        blocks.push_back(json{{"name", b.name}, {"size", b.size}});
    }
    root["blocks"] = std::move(blocks);
    if (model.qbar > 0.0) root["qbar"] = model.qbar;

    json factors = json::array();
    for (const ModelFactor& f : model.factors) {
        json terms = json::array();
        for (const ResidualTerm& t : f.terms) {
            json lins = json::array();
            for (const LinearFactor& l : t.factors) {
                json vec = json::array();
                for (Eigen::Index i = 0; i < l.vector.size(); ++i) vec.push_back(l.vector[i]);
                lins.push_back(json{
                    {"block", model.blocks[static_cast<std::size_t>(l.block)].name},
                    {"vector", std::move(vec)}});
            }
            terms.push_back(json{{"coeff", t.coeff}, {"factors", std::move(lins)}});
        }
        factors.push_back(json{{"terms", std::move(terms)}, {"density", density_to_json(f.density)}});
    }
    root["factors"] = std::move(factors);

    if (doc.x_init) {
        json x = json::array();
        for (Eigen::Index i = 0; i < doc.x_init->size(); ++i) x.push_back((*doc.x_init)[i]);
        root["x_init"] = std::move(x);
    }
    if (!doc.metadata_json.empty()) {
        try {
            root["metadata"] = json::parse(doc.metadata_json);
        } catch (const json::parse_error& e) {
            throw std::invalid_argument(std::string("model json: metadata is not valid JSON: ") +
                                        e.what());
        }
    }
    return root.dump(2) + "\n";
}

void save_model(const ModelDocument& doc, const std::string& path) {
    const std::string text = serialize_model(doc);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << text;
    if (!out.good()) throw std::runtime_error("cannot write file: " + path);
}

}  // namespace airls
