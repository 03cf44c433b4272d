#pragma once

#include <algorithm>
#include <istream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "delaynet/errors.hpp"

namespace delaynet {

/// Directed communication structure: agent i listens to its informer set.
/// Edges carry information from the source agent to the receiver, so the
/// adjacency entry (i, k) is 1 exactly when agent i receives from agent k.
struct Topology {
    int n = 0;
    std::vector<std::vector<int>> informers; // informers[i] sorted, 0-based

    int in_degree(int i) const { return static_cast<int>(informers[i].size()); }

    bool receives_from(int i, int k) const {
        const auto& s = informers[i];
        return std::binary_search(s.begin(), s.end(), k);
    }

    Eigen::MatrixXd adjacency_matrix() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int k : informers[i]) a(i, k) = 1.0;
        return a;
    }

    /// Build from a directed edge list. Edge {from, to} means `to` receives
    /// from `from`. Indices are 1-based in files, matching how the agents
    /// are usually numbered in diagrams.
    static Topology from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
        if (n <= 0) throw InputError("topology: agent count must be positive");
        Topology t;
        t.n = n;
        t.informers.assign(n, {});
        for (const auto& [from, to] : edges) {
            if (from < 1 || from > n || to < 1 || to > n)
                throw InputError("topology: edge (" + std::to_string(from) + "," +
                                 std::to_string(to) + ") out of range for n=" + std::to_string(n));
            if (from == to)
                throw InputError("topology: self-loop on agent " + std::to_string(from));
            t.informers[to - 1].push_back(from - 1);
        }
        for (auto& s : t.informers) {
            std::sort(s.begin(), s.end());
            s.erase(std::unique(s.begin(), s.end()), s.end());
        }
        return t;
    }

    /// Parse { "n": int, "edges": [[from,to],...] }.
    static Topology from_json(const nlohmann::json& j) {
        if (!j.contains("n") || !j.contains("edges"))
            throw InputError("topology json: expected fields \"n\" and \"edges\"");
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw InputError("topology json: each edge must be a [from,to] pair");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        return from_edges(j.at("n").get<int>(), edges);
    }

    static Topology from_stream(std::istream& in) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("topology json: ") + e.what());
        }
        return from_json(j);
    }
};

/// Consensus matrix C = Delta^-1 * A: each row k of the adjacency scaled by
/// the agent's in-degree. Rows sum to one by construction.
inline Eigen::MatrixXd build_c_matrix(const Topology& t) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(t.n, t.n);
    for (int i = 0; i < t.n; ++i) {
        const int deg = t.in_degree(i);
        if (deg == 0)
            throw InputError("topology: agent " + std::to_string(i + 1) +
                             " has no informers (zero in-degree)");
        for (int k : t.informers[i]) c(i, k) = 1.0 / deg;
    }
    return c;
}

/// True when some agent's information can reach every other agent along
/// directed edges, i.e. the information-flow digraph has a spanning tree.
inline bool has_spanning_tree(const Topology& t) {
    // out-edges of the information-flow digraph: k -> i when i listens to k
    std::vector<std::vector<int>> out(t.n);
    for (int i = 0; i < t.n; ++i)
        for (int k : t.informers[i]) out[k].push_back(i);

    std::vector<int> stack, seen(t.n);
    for (int root = 0; root < t.n; ++root) {
        std::fill(seen.begin(), seen.end(), 0);
        stack.assign(1, root);
        seen[root] = 1;
        int count = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : out[v])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
        }
        if (count == t.n) return true;
    }
    return false;
}

} // namespace delaynet
