#include "airfuse/mincut.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <new>

namespace airfuse::mincut {

void BinaryEnergy::set_unary(std::uint32_t i, double cost0, double cost1) {
    if (i >= unary_.size())
        throw InvalidInput("unary term for a node out of range");
    if (!(cost0 >= 0.0) || !(cost1 >= 0.0) || !std::isfinite(cost0) || !std::isfinite(cost1))
        throw InvalidInput("unary costs must be finite and non-negative");
    unary_[i] = {cost0, cost1};
}

void BinaryEnergy::add_unary(std::uint32_t i, double cost0, double cost1) {
    if (i >= unary_.size())
        throw InvalidInput("unary term for a node out of range");
    set_unary(i, unary_[i][0] + cost0, unary_[i][1] + cost1);
}

void BinaryEnergy::add_pairwise(std::uint32_t i, std::uint32_t j, double weight) {
    if (i == j)
        throw InvalidInput("pairwise term connects a node to itself");
    if (i >= unary_.size() || j >= unary_.size())
        throw InvalidInput("pairwise term for a node out of range");
    if (!(weight >= 0.0) || !std::isfinite(weight))
        throw InvalidInput("pairwise weights must be finite and non-negative");
    pairwise_.push_back({i, j, weight});
}

double BinaryEnergy::evaluate(const std::vector<std::uint8_t>& labels) const {
    if (labels.size() != unary_.size())
        throw InvalidInput("labeling size does not match the energy");
    double e = 0.0;
    for (std::size_t i = 0; i < unary_.size(); ++i)
        e += unary_[i][labels[i] ? 1 : 0];
    for (const auto& p : pairwise_)
        if ((labels[p.i] != 0) != (labels[p.j] != 0))
            e += p.weight;
    return e;
}

namespace {

/// Boykov-Kolmogorov max-flow on a graph with real capacities.
class Graph {
public:
    explicit Graph(std::size_t n_nodes) : nodes_(n_nodes) {}

    void reserve_arcs(std::size_t n_edges) { arcs_.reserve(2 * n_edges); }

    void add_terminal_weights(std::int32_t i, double cap_source, double cap_sink) {
        const double delta = nodes_[i].tr_cap;
        if (delta > 0)
            cap_source += delta;
        else
            cap_sink -= delta;
        flow_ += std::min(cap_source, cap_sink);
        nodes_[i].tr_cap = cap_source - cap_sink;
    }

    void add_edge(std::int32_t i, std::int32_t j, double cap, double rev_cap) {
        const auto a = static_cast<std::int32_t>(arcs_.size());
        arcs_.push_back({j, nodes_[i].first, a + 1, cap});
        arcs_.push_back({i, nodes_[j].first, a, rev_cap});
        nodes_[i].first = a;
        nodes_[j].first = a + 1;
    }

    double max_flow() {
        init();
        std::int32_t current = kNone;
        while (true) {
            std::int32_t i = kNone;
            if (current != kNone) {
                i = current;
                current = kNone;
                if (nodes_[i].parent == kNone)
                    i = kNone;
            }
            if (i == kNone) {
                i = next_active();
                if (i == kNone)
                    break;
            }
            const std::int32_t middle = grow(i);
            ++time_;
            if (middle != kNone) {
                current = i;
                augment(middle);
                adopt_orphans();
            }
        }
        return flow_;
    }

    bool source_side(std::int32_t i) const { return nodes_[i].parent != kNone && !nodes_[i].is_sink; }

private:
    static constexpr std::int32_t kNone = -1;      // free node
    static constexpr std::int32_t kTerminal = -2;  // attached to its terminal
    static constexpr std::int32_t kOrphan = -3;
    static constexpr int kInfiniteDist = std::numeric_limits<int>::max();

    struct Arc {
        std::int32_t head;
        std::int32_t next;
        std::int32_t sister;
        double r_cap;
    };

    struct Node {
        std::int32_t first = kNone;
        std::int32_t parent = kNone;
        int ts = 0;
        int dist = 0;
        bool is_sink = false;
        bool queued = false;
        double tr_cap = 0.0;
    };

    void init() {
        time_ = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            n.ts = 0;
            if (n.tr_cap > 0) {
                n.is_sink = false;
                n.parent = kTerminal;
                n.dist = 1;
                set_active(static_cast<std::int32_t>(i));
            } else if (n.tr_cap < 0) {
                n.is_sink = true;
                n.parent = kTerminal;
                n.dist = 1;
                set_active(static_cast<std::int32_t>(i));
            } else {
                n.parent = kNone;
            }
        }
    }

    void set_active(std::int32_t i) {
        if (!nodes_[i].queued) {
            nodes_[i].queued = true;
            active_.push_back(i);
        }
    }

    std::int32_t next_active() {
        while (!active_.empty()) {
            const std::int32_t i = active_.front();
            active_.pop_front();
            nodes_[i].queued = false;
            if (nodes_[i].parent != kNone)
                return i;
        }
        return kNone;
    }

    /// Extends the tree of node i; returns an arc from the source tree to the
    /// sink tree if the trees touch.
    std::int32_t grow(std::int32_t i) {
        Node& ni = nodes_[i];
        for (std::int32_t a = ni.first; a != kNone; a = arcs_[a].next) {
            const bool residual = ni.is_sink ? arcs_[arcs_[a].sister].r_cap > 0 : arcs_[a].r_cap > 0;
            if (!residual)
                continue;
            const std::int32_t j = arcs_[a].head;
            Node& nj = nodes_[j];
            if (nj.parent == kNone) {
                nj.is_sink = ni.is_sink;
                nj.parent = arcs_[a].sister;
                nj.ts = ni.ts;
                nj.dist = ni.dist + 1;
                set_active(j);
            } else if (nj.is_sink != ni.is_sink) {
                return ni.is_sink ? arcs_[a].sister : a;
            } else if (nj.ts <= ni.ts && nj.dist > ni.dist) {
                nj.parent = arcs_[a].sister;
                nj.ts = ni.ts;
                nj.dist = ni.dist + 1;
            }
        }
        return kNone;
    }

    void set_orphan_front(std::int32_t i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_front(i);
    }

    void set_orphan_rear(std::int32_t i) {
        nodes_[i].parent = kOrphan;
        orphans_.push_back(i);
    }

    void augment(std::int32_t middle) {
        double bottleneck = arcs_[middle].r_cap;
        std::int32_t i = arcs_[arcs_[middle].sister].head;
        for (std::int32_t a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
            bottleneck = std::min(bottleneck, arcs_[arcs_[a].sister].r_cap);
            i = arcs_[a].head;
        }
        bottleneck = std::min(bottleneck, nodes_[i].tr_cap);
        i = arcs_[middle].head;
        for (std::int32_t a = nodes_[i].parent; a != kTerminal; a = nodes_[i].parent) {
            bottleneck = std::min(bottleneck, arcs_[a].r_cap);
            i = arcs_[a].head;
        }
        bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);

        arcs_[arcs_[middle].sister].r_cap += bottleneck;
        arcs_[middle].r_cap -= bottleneck;
        i = arcs_[arcs_[middle].sister].head;
        while (true) {
            const std::int32_t a = nodes_[i].parent;
            if (a == kTerminal)
                break;
            arcs_[a].r_cap += bottleneck;
            arcs_[arcs_[a].sister].r_cap -= bottleneck;
            if (arcs_[arcs_[a].sister].r_cap == 0)
                set_orphan_front(i);
            i = arcs_[a].head;
        }
        nodes_[i].tr_cap -= bottleneck;
        if (nodes_[i].tr_cap == 0)
            set_orphan_front(i);
        i = arcs_[middle].head;
        while (true) {
            const std::int32_t a = nodes_[i].parent;
            if (a == kTerminal)
                break;
            arcs_[arcs_[a].sister].r_cap += bottleneck;
            arcs_[a].r_cap -= bottleneck;
            if (arcs_[a].r_cap == 0)
                set_orphan_front(i);
            i = arcs_[a].head;
        }
        nodes_[i].tr_cap += bottleneck;
        if (nodes_[i].tr_cap == 0)
            set_orphan_front(i);
        flow_ += bottleneck;
    }

    void adopt_orphans() {
        while (!orphans_.empty()) {
            const std::int32_t i = orphans_.front();
            orphans_.pop_front();
            process_orphan(i);
        }
    }

    void process_orphan(std::int32_t i) {
        const bool sink = nodes_[i].is_sink;
        std::int32_t best_arc = kNone;
        int best_dist = kInfiniteDist;
        for (std::int32_t a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
            const double cap = sink ? arcs_[a0].r_cap : arcs_[arcs_[a0].sister].r_cap;
            if (!(cap > 0))
                continue;
            std::int32_t j = arcs_[a0].head;
            if (nodes_[j].is_sink != sink || nodes_[j].parent == kNone)
                continue;
            // Follow j to its root to check it still reaches the terminal.
            int d = 0;
            while (true) {
                if (nodes_[j].ts == time_) {
                    d += nodes_[j].dist;
                    break;
                }
                const std::int32_t a = nodes_[j].parent;
                ++d;
                if (a == kTerminal) {
                    nodes_[j].ts = time_;
                    nodes_[j].dist = 1;
                    break;
                }
                if (a == kOrphan) {
                    d = kInfiniteDist;
                    break;
                }
                j = arcs_[a].head;
            }
            if (d == kInfiniteDist)
                continue;
            if (d < best_dist) {
                best_arc = a0;
                best_dist = d;
            }
            for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
                nodes_[j].ts = time_;
                nodes_[j].dist = d--;
            }
        }

        nodes_[i].parent = best_arc;
        if (best_arc != kNone) {
            nodes_[i].ts = time_;
            nodes_[i].dist = best_dist + 1;
            return;
        }
        for (std::int32_t a0 = nodes_[i].first; a0 != kNone; a0 = arcs_[a0].next) {
            const std::int32_t j = arcs_[a0].head;
            const std::int32_t a = nodes_[j].parent;
            if (nodes_[j].is_sink != sink || a == kNone)
                continue;
            const double cap = sink ? arcs_[a0].r_cap : arcs_[arcs_[a0].sister].r_cap;
            if (cap > 0)
                set_active(j);
            if (a != kTerminal && a != kOrphan && arcs_[a].head == i)
                set_orphan_rear(j);
        }
    }

    std::vector<Node> nodes_;
    std::vector<Arc> arcs_;
    std::deque<std::int32_t> active_;
    std::deque<std::int32_t> orphans_;
    double flow_ = 0.0;
    int time_ = 0;
};

void check_duplicate_edges(const std::vector<PairwiseTerm>& terms) {
    std::vector<std::uint64_t> keys;
    keys.reserve(terms.size());
    for (const auto& t : terms) {
        const std::uint64_t lo = std::min(t.i, t.j), hi = std::max(t.i, t.j);
        keys.push_back((lo << 32) | hi);
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
        throw InvalidInput("binary energy contains a duplicate undirected pairwise term");
}

}  // namespace

Solution solve(const BinaryEnergy& energy) {
    const std::size_t n = energy.size();
    if (n > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()) ||
        energy.pairwise().size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max() / 2))
        throw InvalidInput("binary energy too large for 32-bit graph indices");
    check_duplicate_edges(energy.pairwise());

    Solution sol;
    try {
        Graph g(n);
        g.reserve_arcs(energy.pairwise().size());
        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = energy.unary(static_cast<std::uint32_t>(i));
            sol.constant += std::min(u[0], u[1]);
            // A node on the sink side (label 1) cuts its source arc.
            g.add_terminal_weights(static_cast<std::int32_t>(i), u[1], u[0]);
        }
        for (const auto& p : energy.pairwise())
            if (p.weight > 0)
                g.add_edge(static_cast<std::int32_t>(p.i), static_cast<std::int32_t>(p.j), p.weight, p.weight);
        const double total = g.max_flow();
        sol.max_flow = total - sol.constant;
        sol.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            sol.labels[i] = g.source_side(static_cast<std::int32_t>(i)) ? 0 : 1;
    } catch (const std::bad_alloc&) {
        throw Error("mincut: out of memory building or solving a graph with " + std::to_string(n) + " nodes and " +
                    std::to_string(energy.pairwise().size()) + " edges");
    }
    sol.energy = energy.evaluate(sol.labels);
    return sol;
}

}  // namespace airfuse::mincut
