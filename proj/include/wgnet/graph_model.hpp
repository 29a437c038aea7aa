#pragma once

// Metric graphs with vertex gluing data. Every edge stores a single coordinate t
// with t = 0 at its start vertex; infinite edges start at their junction.

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "wgnet/common.hpp"
#include "wgnet/vertex_conditions.hpp"

namespace wgnet {

struct FreeEndBC {
    enum class Type { Dirichlet, Neumann, Robin };
    Type type = Type::Dirichlet;
    double alpha = 0.0;  // Robin only: eps * (exterior normal derivative) + alpha * u = 0

    static FreeEndBC dirichlet() { return {Type::Dirichlet, 0.0}; }
    static FreeEndBC neumann() { return {Type::Neumann, 0.0}; }
    static FreeEndBC robin(double alpha) { return {Type::Robin, alpha}; }

    bool operator==(const FreeEndBC&) const = default;
};

enum class VertexKind { FreeEnd, Junction };

struct Vertex {
    std::string id;
    VertexKind kind = VertexKind::Junction;
    FreeEndBC bc;                             // free ends
    std::optional<VertexCondition> condition; // junctions
    std::vector<int> order;                   // incident edge indices in channel order
};

struct Edge {
    std::string id;
    int start = -1;
    int end = -1;  // -1 for infinite edges
    double length = kInf;

    bool infinite() const { return end < 0; }
};

/// Map from the edge coordinate t to the vertex-local coordinate s (s = 0 at the vertex).
struct EndpointMap {
    bool forward = true;  // vertex sits at t = 0
    double length = kInf;

    double s(double t) const { return forward ? t : length - t; }
    double t(double s) const { return forward ? s : length - s; }
};

/// Validated, immutable metric graph.
class MetricGraph {
public:
    MetricGraph(double lambda0, double lambda1, std::vector<Vertex> vertices,
                std::vector<Edge> edges);

    double lambda0() const { return lambda0_; }
    double lambda1() const { return lambda1_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Vertex& vertex(int i) const { return vertices_.at(i); }
    const Edge& edge(int i) const { return edges_.at(i); }

    int edge_count() const { return static_cast<int>(edges_.size()); }
    int lead_count() const { return static_cast<int>(leads_.size()); }
    int finite_edge_count() const { return edge_count() - lead_count(); }
    int junction_count() const;
    /// Infinite edge indices in declaration order (the S-matrix channel order).
    const std::vector<int>& leads() const { return leads_; }
    bool bounded() const { return leads_.empty(); }
    double max_finite_length() const;

    int vertex_index(const std::string& id) const;
    int edge_index(const std::string& id) const;

private:
    void validate() const;

    double lambda0_;
    double lambda1_;
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
    std::vector<int> leads_;
    std::unordered_map<std::string, int> vertex_lookup_;
    std::unordered_map<std::string, int> edge_lookup_;
};

/// Orientation of `edge` seen from `vertex`; throws InputError if not incident.
EndpointMap local_coordinate(const MetricGraph& graph, int edge, int vertex);

/// Parses the graph schema. Relative table paths are resolved against `base_dir`.
MetricGraph parse_graph(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
MetricGraph load_graph(const std::filesystem::path& path);
nlohmann::json serialize_graph(const MetricGraph& graph);

}  // namespace wgnet
