#include "wgnet/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace wgnet {

using nlohmann::json;

MetricGraph::MetricGraph(double lambda0, double lambda1, std::vector<Vertex> vertices,
                         std::vector<Edge> edges)
    : lambda0_(lambda0), lambda1_(lambda1), vertices_(std::move(vertices)), edges_(std::move(edges)) {
    for (int i = 0; i < static_cast<int>(vertices_.size()); ++i)
        if (!vertex_lookup_.emplace(vertices_[i].id, i).second)
            throw InputError("duplicate vertex id", vertices_[i].id);
    for (int i = 0; i < static_cast<int>(edges_.size()); ++i) {
        if (!edge_lookup_.emplace(edges_[i].id, i).second)
            throw InputError("duplicate edge id", edges_[i].id);
        if (edges_[i].infinite()) leads_.push_back(i);
    }
    validate();
}

void MetricGraph::validate() const {
    if (!(lambda0_ < lambda1_)) throw InputError("lambda0 must be smaller than lambda1");
    if (edges_.empty()) throw InputError("graph has no edges");
    const int nv = static_cast<int>(vertices_.size());
    std::vector<std::vector<int>> incident(nv);
    for (int e = 0; e < edge_count(); ++e) {
        const Edge& ed = edges_[e];
        if (ed.start < 0 || ed.start >= nv) throw InputError("start vertex does not exist", ed.id);
        if (ed.infinite()) {
            if (!std::isinf(ed.length)) throw InputError("edge without end vertex must be infinite", ed.id);
            if (vertices_[ed.start].kind != VertexKind::Junction)
                throw InputError("infinite edge must start at a junction", ed.id);
        } else {
            if (ed.end >= nv) throw InputError("end vertex does not exist", ed.id);
            if (ed.end == ed.start) throw InputError("finite edge needs two distinct vertices", ed.id);
            if (!(ed.length > 0.0) || std::isinf(ed.length))
                throw InputError("finite edge length must be positive", ed.id);
            incident[ed.end].push_back(e);
        }
        incident[ed.start].push_back(e);
    }
    for (int v = 0; v < nv; ++v) {
        const Vertex& vx = vertices_[v];
        const int deg = static_cast<int>(incident[v].size());
        std::vector<int> sorted_order = vx.order;
        std::sort(sorted_order.begin(), sorted_order.end());
        std::vector<int> sorted_inc = incident[v];
        std::sort(sorted_inc.begin(), sorted_inc.end());
        if (sorted_order != sorted_inc)
            throw InputError("channel order must list each incident edge exactly once", vx.id);
        if (vx.kind == VertexKind::FreeEnd) {
            if (deg != 1) throw InputError("free end must have degree 1", vx.id);
            if (vx.bc.type == FreeEndBC::Type::Robin && !(vx.bc.alpha >= 0.0))
                throw InputError("Robin coefficient must be nonnegative", vx.id);
        } else {
            if (deg < 2) throw InputError("junction must have degree >= 2", vx.id);
            if (!vx.condition) throw InputError("junction has no vertex condition", vx.id);
            if (vx.condition->degree() != deg)
                throw InputError("scattering matrix size " + std::to_string(vx.condition->degree()) +
                                     " differs from degree " + std::to_string(deg),
                                 vx.id);
        }
    }
}

int MetricGraph::junction_count() const {
    return static_cast<int>(std::count_if(vertices_.begin(), vertices_.end(), [](const Vertex& v) {
        return v.kind == VertexKind::Junction;
    }));
}

double MetricGraph::max_finite_length() const {
    double m = 0.0;
    for (const auto& e : edges_)
        if (!e.infinite()) m = std::max(m, e.length);
    return m;
}

int MetricGraph::vertex_index(const std::string& id) const {
    auto it = vertex_lookup_.find(id);
    if (it == vertex_lookup_.end()) throw InputError("unknown vertex", id);
    return it->second;
}

int MetricGraph::edge_index(const std::string& id) const {
    auto it = edge_lookup_.find(id);
    if (it == edge_lookup_.end()) throw InputError("unknown edge", id);
    return it->second;
}

EndpointMap local_coordinate(const MetricGraph& graph, int edge, int vertex) {
    const Edge& e = graph.edge(edge);
    if (e.start == vertex) return {true, e.length};
    if (e.end == vertex) return {false, e.length};
    throw InputError("vertex " + graph.vertex(vertex).id + " is not an endpoint", e.id);
}

namespace {

FreeEndBC parse_bc(const json& j, const std::string& id) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "dirichlet") return FreeEndBC::dirichlet();
        if (s == "neumann") return FreeEndBC::neumann();
        throw InputError("unknown boundary condition '" + s + "'", id);
    }
    if (j.is_object() && j.contains("robin") && j.at("robin").is_number())
        return FreeEndBC::robin(j.at("robin").get<double>());
    throw InputError("boundary condition must be \"dirichlet\", \"neumann\" or {\"robin\": alpha}", id);
}

json bc_to_json(const FreeEndBC& bc) {
    switch (bc.type) {
        case FreeEndBC::Type::Dirichlet: return "dirichlet";
        case FreeEndBC::Type::Neumann: return "neumann";
        case FreeEndBC::Type::Robin: return json{{"robin", bc.alpha}};
    }
    return "dirichlet";
}

VertexCondition parse_condition(const json& j, int degree, const std::string& id,
                                const std::filesystem::path& base_dir) {
    if (degree < 2) throw InputError("junction has degree " + std::to_string(degree) + ", needs at least 2", id);
    if (j.is_string()) {
        if (j.get<std::string>() == "kirchhoff") return VertexCondition::kirchhoff(degree);
        throw InputError("unknown condition '" + j.get<std::string>() + "'", id);
    }
    if (j.is_object() && j.contains("kirchhoff")) return VertexCondition::kirchhoff(degree);
    if (j.is_object() && j.contains("matrix"))
        return VertexCondition::constant(matrix_from_json(j.at("matrix"), id));
    if (j.is_object() && j.contains("table")) {
        const auto& t = j.at("table");
        if (t.is_string()) {
            std::filesystem::path p = t.get<std::string>();
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            return VertexCondition::tabulated(load_table(p), p.string());
        }
        return VertexCondition::tabulated(table_from_json(t, id));
    }
    throw InputError("condition must be \"kirchhoff\", {\"matrix\": ...} or {\"table\": ...}", id);
}

json condition_to_json(const VertexCondition& c) {
    if (c.is_kirchhoff()) return "kirchhoff";
    if (c.is_constant()) return json{{"matrix", matrix_to_json(std::get<ConstantCondition>(c.data()).matrix)}};
    if (!c.source_path().empty()) return json{{"table", c.source_path()}};
    return json{{"table", table_to_json(c.table())}};
}

template <class T>
T required(const json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) throw InputError(std::string("missing field '") + key + "'", context);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError(std::string("field '") + key + "' has the wrong type", context);
    }
}

}  // namespace

MetricGraph parse_graph(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw InputError("graph document must be an object");
    const double lambda0 = required<double>(doc, "lambda0", "graph");
    const double lambda1 = required<double>(doc, "lambda1", "graph");
    if (!doc.contains("vertices") || !doc.at("vertices").is_array())
        throw InputError("missing field 'vertices'", "graph");
    if (!doc.contains("edges") || !doc.at("edges").is_array())
        throw InputError("missing field 'edges'", "graph");

    std::unordered_map<std::string, int> vidx;
    const auto& vdocs = doc.at("vertices");
    for (std::size_t i = 0; i < vdocs.size(); ++i)
        vidx[required<std::string>(vdocs[i], "id", "vertex #" + std::to_string(i))] = static_cast<int>(i);

    std::vector<Edge> edges;
    std::unordered_map<std::string, int> eidx;
    std::vector<int> degree(vdocs.size(), 0);
    for (std::size_t i = 0; i < doc.at("edges").size(); ++i) {
        const auto& ed = doc.at("edges")[i];
        Edge e;
        e.id = required<std::string>(ed, "id", "edge #" + std::to_string(i));
        const auto start = required<std::string>(ed, "start", e.id);
        if (!vidx.count(start)) throw InputError("unknown start vertex '" + start + "'", e.id);
        e.start = vidx[start];
        if (!ed.contains("length")) throw InputError("missing field 'length'", e.id);
        const auto& len = ed.at("length");
        if (len.is_string() && len.get<std::string>() == "inf") {
            e.length = kInf;
        } else if (len.is_number()) {
            e.length = len.get<double>();
        } else {
            throw InputError("length must be a number or \"inf\"", e.id);
        }
        if (ed.contains("end") && !ed.at("end").is_null()) {
            const auto end = required<std::string>(ed, "end", e.id);
            if (!vidx.count(end)) throw InputError("unknown end vertex '" + end + "'", e.id);
            e.end = vidx[end];
            if (std::isinf(e.length)) throw InputError("edge with two vertices must be finite", e.id);
            ++degree[e.end];
        } else if (!std::isinf(e.length)) {
            throw InputError("finite edge is missing its end vertex", e.id);
        }
        ++degree[e.start];
        eidx[e.id] = static_cast<int>(i);
        edges.push_back(std::move(e));
    }

    std::vector<Vertex> vertices;
    for (std::size_t i = 0; i < vdocs.size(); ++i) {
        const auto& vd = vdocs[i];
        Vertex v;
        v.id = vd.at("id").get<std::string>();
        const auto kind = required<std::string>(vd, "kind", v.id);
        if (kind == "free-end" || kind == "free_end") {
            v.kind = VertexKind::FreeEnd;
            if (!vd.contains("bc")) throw InputError("missing field 'bc'", v.id);
            v.bc = parse_bc(vd.at("bc"), v.id);
        } else if (kind == "junction") {
            v.kind = VertexKind::Junction;
        } else {
            throw InputError("unknown vertex kind '" + kind + "'", v.id);
        }
        if (vd.contains("order")) {
            for (const auto& eid : vd.at("order")) {
                const auto name = eid.get<std::string>();
                if (!eidx.count(name)) throw InputError("order names unknown edge '" + name + "'", v.id);
                v.order.push_back(eidx[name]);
            }
        } else {
            for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
                if (edges[e].start == static_cast<int>(i)) v.order.push_back(e);
                if (edges[e].end == static_cast<int>(i)) v.order.push_back(e);
            }
        }
        if (v.kind == VertexKind::Junction) {
            if (!vd.contains("condition")) throw InputError("missing field 'condition'", v.id);
            v.condition = parse_condition(vd.at("condition"), degree[i], v.id, base_dir);
        }
        vertices.push_back(std::move(v));
    }
    return MetricGraph(lambda0, lambda1, std::move(vertices), std::move(edges));
}

MetricGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open graph file", path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(std::string("parse error: ") + e.what(), path.string());
    }
    return parse_graph(doc, path.parent_path());
}

json serialize_graph(const MetricGraph& g) {
    json doc;
    doc["lambda0"] = g.lambda0();
    doc["lambda1"] = g.lambda1();
    json vs = json::array();
    for (const auto& v : g.vertices()) {
        json j;
        j["id"] = v.id;
        j["kind"] = v.kind == VertexKind::FreeEnd ? "free-end" : "junction";
        if (v.kind == VertexKind::FreeEnd) j["bc"] = bc_to_json(v.bc);
        else j["condition"] = condition_to_json(*v.condition);
        json order = json::array();
        for (int e : v.order) order.push_back(g.edge(e).id);
        j["order"] = std::move(order);
        vs.push_back(std::move(j));
    }
    json es = json::array();
    for (const auto& e : g.edges()) {
        json j;
        j["id"] = e.id;
        j["start"] = g.vertex(e.start).id;
        if (e.infinite()) {
            j["length"] = "inf";
        } else {
            j["end"] = g.vertex(e.end).id;
            j["length"] = e.length;
        }
        es.push_back(std::move(j));
    }
    doc["vertices"] = std::move(vs);
    doc["edges"] = std::move(es);
    return doc;
}

}  // namespace wgnet
