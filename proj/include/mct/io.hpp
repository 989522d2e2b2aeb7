#pragma once
#include "mct/dataset.hpp"
#include "mct/errors.hpp"
#include "mct/expfam.hpp"
#include "mct/multilevel.hpp"
#include "mct/ot.hpp"

#include "json.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace mct {

inline constexpr int kSchemaVersion = 1;

using Json = nlohmann::json;

namespace detail {

inline std::string field_path(const std::string& parent, const std::string& key)
{
    return parent.empty() ? key : parent + "." + key;
}

inline std::string index_path(const std::string& parent, std::size_t i)
{
    return parent + "[" + std::to_string(i) + "]";
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& path)
{
    if (!obj.is_object()) throw DataError("field '" + path + "': expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw DataError("missing field '" + field_path(path, key) + "'");
    return *it;
}

inline const Json& expect_array(const Json& j, const std::string& path)
{
    if (!j.is_array()) throw DataError("field '" + path + "': expected an array");
    return j;
}

inline double read_number(const Json& j, const std::string& path)
{
    if (!j.is_number()) throw DataError("field '" + path + "': expected a number");
    return j.get<double>();
}

inline long long read_integer(const Json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw DataError("field '" + path + "': expected an integer");
    return j.get<long long>();
}

inline int read_int(const Json& j, const std::string& path)
{
    const long long v = read_integer(j, path);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw DataError("field '" + path + "': integer out of range");
    return static_cast<int>(v);
}

inline bool read_bool(const Json& j, const std::string& path)
{
    if (!j.is_boolean()) throw DataError("field '" + path + "': expected a boolean");
    return j.get<bool>();
}

inline std::string read_string(const Json& j, const std::string& path)
{
    if (!j.is_string()) throw DataError("field '" + path + "': expected a string");
    return j.get<std::string>();
}

inline Json vector_json(const Vector& v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Vector read_vector(const Json& j, const std::string& path)
{
    expect_array(j, path);
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = read_number(j[i], index_path(path, i));
    return v;
}

inline Json matrix_json(const Matrix& m)
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
    return out;
}

// Rows of equal length; an empty array reads as a 0 x cols matrix.
inline Matrix read_matrix(const Json& j, const std::string& path, Eigen::Index empty_cols = 0)
{
    expect_array(j, path);
    if (j.empty()) return Matrix(0, empty_cols);
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(expect_array(j[0], index_path(path, 0)).size());
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string rp = index_path(path, r);
        const Vector row = read_vector(j[r], rp);
        if (row.size() != cols) throw DataError("field '" + rp + "': expected " + std::to_string(cols) + " entries");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

inline Json read_document(const std::string& text, const std::string& source)
{
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // The parser reports "at line L, column C" in its message.
        throw DataError(source + ": " + e.what());
    }
}

inline void check_schema_version(const Json& doc)
{
    const int version = read_int(require(doc, "schema_version", ""), "schema_version");
    if (version != kSchemaVersion)
        throw DataError("schema_version " + std::to_string(version) + " is not supported (expected "
                        + std::to_string(kSchemaVersion) + ")");
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

} // namespace detail

inline Json to_json(const FamilySpec& spec)
{
    Json j{{"family", spec.is_gaussian() ? "gaussian" : "categorical"}, {"dim", spec.dim}};
    if (spec.is_gaussian()) j["sigma2"] = spec.sigma2;
    return j;
}

inline FamilySpec family_spec_from_json(const Json& j, const std::string& path = "spec")
{
    using namespace detail;
    const std::string family = read_string(require(j, "family", path), field_path(path, "family"));
    const int dim = read_int(require(j, "dim", path), field_path(path, "dim"));
    FamilySpec spec;
    if (family == "gaussian")
        spec = FamilySpec::gaussian(dim, read_number(require(j, "sigma2", path), field_path(path, "sigma2")));
    else if (family == "categorical")
        spec = FamilySpec::categorical(dim);
    else
        throw DataError("field '" + field_path(path, "family") + "': unknown family '" + family + "'");
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("field '" + path + "': " + e.what());
    }
    return spec;
}

inline Json to_json(const Mixture& m)
{
    Json atoms = Json::array();
    for (const auto& a : m.atoms) atoms.push_back(detail::vector_json(a));
    return Json{{"weights", detail::vector_json(m.weights)}, {"atoms", atoms}};
}

inline Mixture mixture_from_json(const Json& j, const FamilySpec& spec, const std::string& path)
{
    using namespace detail;
    Mixture m;
    m.spec = spec;
    m.weights = read_vector(require(j, "weights", path), field_path(path, "weights"));
    const std::string ap = field_path(path, "atoms");
    const Json& atoms = expect_array(require(j, "atoms", path), ap);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        m.atoms.push_back(read_vector(atoms[k], index_path(ap, k)));
        if (m.atoms.back().size() != spec.dim)
            throw DataError("field '" + index_path(ap, k) + "': expected " + std::to_string(spec.dim) + " entries");
    }
    if (static_cast<std::size_t>(m.weights.size()) != m.atoms.size())
        throw DataError("field '" + path + "': weights and atoms differ in length");
    return m;
}

inline Json to_json(const TransportPlan& p)
{
    Json j{{"values", detail::matrix_json(p.values)}, {"row_marginal", detail::vector_json(p.row_marginal)}};
    if (p.col_marginal) j["col_marginal"] = detail::vector_json(*p.col_marginal);
    return j;
}

inline TransportPlan plan_from_json(const Json& j, const std::string& path)
{
    using namespace detail;
    TransportPlan p;
    p.row_marginal = read_vector(require(j, "row_marginal", path), field_path(path, "row_marginal"));
    p.values = read_matrix(require(j, "values", path), field_path(path, "values"));
    if (j.contains("col_marginal")) p.col_marginal = read_vector(j["col_marginal"], field_path(path, "col_marginal"));
    if (p.values.rows() != p.row_marginal.size())
        throw DataError("field '" + path + "': values and row_marginal differ in length");
    if (p.col_marginal && p.col_marginal->size() != p.values.cols())
        throw DataError("field '" + path + "': values and col_marginal differ in length");
    return p;
}

// ---------------------------------------------------------------- datasets

inline Json dataset_to_json(const GroupedDataset& data)
{
    Json groups = Json::array();
    for (const auto& g : data.groups) {
        Json points = Json::array();
        if (g.sample.is_discrete())
            for (int c : g.sample.categories) points.push_back(c);
        else
            points = detail::matrix_json(g.sample.points);
        groups.push_back(Json{{"id", g.id}, {"points", points}});
    }
    Json doc{{"schema_version", kSchemaVersion}, {"spec", to_json(data.spec)}, {"groups", groups}};
    if (data.labels) doc["labels"] = *data.labels;
    doc["meta"] = data.meta;
    return doc;
}

inline GroupedDataset dataset_from_json(const Json& doc)
{
    using namespace detail;
    check_schema_version(doc);
    GroupedDataset data;
    data.spec = family_spec_from_json(require(doc, "spec", ""));
    const Json& groups = expect_array(require(doc, "groups", ""), "groups");
    for (std::size_t j = 0; j < groups.size(); ++j) {
        const std::string gp = index_path("groups", j);
        Group g;
        g.id = read_string(require(groups[j], "id", gp), field_path(gp, "id"));
        const std::string pp = field_path(gp, "points");
        const Json& points = expect_array(require(groups[j], "points", gp), pp);
        if (data.spec.is_categorical()) {
            std::vector<int> cats;
            cats.reserve(points.size());
            for (std::size_t i = 0; i < points.size(); ++i) cats.push_back(read_int(points[i], index_path(pp, i)));
            g.sample = Sample::discrete(std::move(cats));
        } else {
            g.sample = Sample::continuous(read_matrix(points, pp, data.spec.dim));
        }
        data.groups.push_back(std::move(g));
    }
    if (doc.contains("labels")) {
        const Json& labels = expect_array(doc["labels"], "labels");
        std::vector<int> out;
        for (std::size_t i = 0; i < labels.size(); ++i) out.push_back(read_int(labels[i], index_path("labels", i)));
        data.labels = std::move(out);
    }
    if (doc.contains("meta")) {
        const Json& meta = doc["meta"];
        if (!meta.is_object()) throw DataError("field 'meta': expected an object");
        for (const auto& [key, value] : meta.items())
            data.meta[key] = read_string(value, field_path("meta", key));
    }
    data.validate();
    return data;
}

inline void save_dataset(const GroupedDataset& data, const std::string& path)
{
    detail::write_file(path, dataset_to_json(data).dump());
}

inline GroupedDataset load_dataset(const std::string& path)
{
    return dataset_from_json(detail::read_document(detail::read_file(path), path));
}

// ------------------------------------------------------------------ models

inline Json to_json(const MctConfig& c)
{
    Json j{{"K", c.K},
           {"C", c.C},
           {"L", c.L},
           {"zeta", c.zeta},
           {"lambda_l", c.lambda_l},
           {"lambda_g", c.lambda_g},
           {"max_iter", c.max_iter},
           {"tol", c.tol},
           {"seed", c.seed},
           {"local_warmup", c.local_warmup},
           {"init_barycenter_iter", c.init_barycenter_iter},
           {"init_restarts", c.init_restarts},
           {"threads", c.threads}};
    if (c.lambda_a) j["lambda_a"] = *c.lambda_a;
    return j;
}

inline MctConfig mct_config_from_json(const Json& j, const std::string& path = "config")
{
    using namespace detail;
    auto num = [&](const char* key) { return read_number(require(j, key, path), field_path(path, key)); };
    auto integer = [&](const char* key) { return read_int(require(j, key, path), field_path(path, key)); };
    MctConfig c;
    c.K.clear();
    const std::string kp = field_path(path, "K");
    const Json& ks = expect_array(require(j, "K", path), kp);
    for (std::size_t i = 0; i < ks.size(); ++i) c.K.push_back(read_int(ks[i], index_path(kp, i)));
    c.C = integer("C");
    c.L = integer("L");
    c.zeta = num("zeta");
    c.lambda_l = num("lambda_l");
    c.lambda_g = num("lambda_g");
    if (j.contains("lambda_a")) c.lambda_a = read_number(j["lambda_a"], field_path(path, "lambda_a"));
    c.max_iter = integer("max_iter");
    c.tol = num("tol");
    const Json& seed = require(j, "seed", path);
    if (!seed.is_number_unsigned()) throw DataError("field '" + field_path(path, "seed") + "': expected an unsigned integer");
    c.seed = seed.get<std::uint64_t>();
    c.local_warmup = integer("local_warmup");
    c.init_barycenter_iter = integer("init_barycenter_iter");
    c.init_restarts = integer("init_restarts");
    c.threads = integer("threads");
    return c;
}

inline Json model_to_json(const MctModel& model)
{
    Json locals = Json::array(), local_plans = Json::array(), globals = Json::array(), partial = Json::array();
    for (const auto& m : model.locals) locals.push_back(to_json(m));
    for (const auto& p : model.local_plans) local_plans.push_back(to_json(p));
    for (const auto& g : model.globals) globals.push_back(to_json(g));
    for (const auto& row : model.partial_plans) {
        Json r = Json::array();
        for (const auto& p : row) r.push_back(to_json(p));
        partial.push_back(r);
    }
    return Json{{"schema_version", kSchemaVersion},
                {"config", to_json(model.config)},
                {"spec", to_json(model.spec)},
                {"locals", locals},
                {"local_plans", local_plans},
                {"globals", globals},
                {"plan_a", detail::matrix_json(model.plan_a.values)},
                {"b", detail::vector_json(model.b)},
                {"partial_plans", partial},
                {"trace", model.trace},
                {"assignments", assign_groups(model)},
                {"iterations", model.iterations},
                {"converged", model.converged}};
}

inline MctModel model_from_json(const Json& doc)
{
    using namespace detail;
    check_schema_version(doc);
    MctModel model;
    model.config = mct_config_from_json(require(doc, "config", ""));
    model.spec = family_spec_from_json(require(doc, "spec", ""));
    const Json& locals = expect_array(require(doc, "locals", ""), "locals");
    for (std::size_t j = 0; j < locals.size(); ++j)
        model.locals.push_back(mixture_from_json(locals[j], model.spec, index_path("locals", j)));
    const Json& plans = expect_array(require(doc, "local_plans", ""), "local_plans");
    for (std::size_t j = 0; j < plans.size(); ++j)
        model.local_plans.push_back(plan_from_json(plans[j], index_path("local_plans", j)));
    const Json& globals = expect_array(require(doc, "globals", ""), "globals");
    for (std::size_t m = 0; m < globals.size(); ++m)
        model.globals.push_back(mixture_from_json(globals[m], model.spec, index_path("globals", m)));

    const std::size_t J = model.locals.size(), C = model.globals.size();
    if (model.local_plans.size() != J) throw DataError("field 'local_plans': expected one plan per local");
    const Matrix a = read_matrix(require(doc, "plan_a", ""), "plan_a", static_cast<Eigen::Index>(C));
    if (static_cast<std::size_t>(a.rows()) != J || static_cast<std::size_t>(a.cols()) != C)
        throw DataError("field 'plan_a': expected " + std::to_string(J) + " x " + std::to_string(C) + " entries");
    model.plan_a = TransportPlan{a, Vector::Constant(static_cast<Eigen::Index>(J), 1.0 / static_cast<double>(J)),
                                 std::nullopt};
    model.b = read_vector(require(doc, "b", ""), "b");
    if (static_cast<std::size_t>(model.b.size()) != C) throw DataError("field 'b': expected one entry per global");

    const Json& partial = expect_array(require(doc, "partial_plans", ""), "partial_plans");
    if (partial.size() != J) throw DataError("field 'partial_plans': expected one row per local");
    for (std::size_t j = 0; j < J; ++j) {
        const std::string rp = index_path("partial_plans", j);
        const Json& row = expect_array(partial[j], rp);
        if (row.size() != C) throw DataError("field '" + rp + "': expected one plan per global");
        std::vector<TransportPlan> plans_j;
        for (std::size_t m = 0; m < C; ++m) plans_j.push_back(plan_from_json(row[m], index_path(rp, m)));
        model.partial_plans.push_back(std::move(plans_j));
    }
    const Json& trace = expect_array(require(doc, "trace", ""), "trace");
    for (std::size_t i = 0; i < trace.size(); ++i) model.trace.push_back(read_number(trace[i], index_path("trace", i)));
    model.iterations = read_int(require(doc, "iterations", ""), "iterations");
    model.converged = read_bool(require(doc, "converged", ""), "converged");
    try {
        model.config.validate(J);
        for (const auto& m : model.locals) m.validate();
        for (const auto& m : model.globals) m.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid model: ") + e.what());
    }
    return model;
}

inline void save_model(const MctModel& model, const std::string& path)
{
    detail::write_file(path, model_to_json(model).dump());
}

inline MctModel load_model(const std::string& path)
{
    return model_from_json(detail::read_document(detail::read_file(path), path));
}

} // namespace mct
