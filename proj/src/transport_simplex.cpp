#include "wsub/transport_simplex.hpp"

#include "wsub/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wsub {

namespace {

struct Basic {
    Eigen::Index row;
    Eigen::Index col;
    double flow;
    bool alive;
};

class TransportSimplex {
public:
    TransportSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b)
        : c_(cost), n_(cost.rows()), m_(cost.cols()), adj_(static_cast<std::size_t>(n_ + m_)) {
        north_west(a, b);
    }

    TransportPlan run() {
        const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
        const double eps = 1e-12 * scale;
        Eigen::VectorXd u(n_), v(m_);
        long degenerate_run = 0;
        long pivots = 0;
        const long max_pivots = 50 * (n_ + m_) * (n_ + m_) + 1000;
        while (pivots < max_pivots) {
            potentials(u, v);
            const bool bland = degenerate_run > 2 * (n_ + m_);
            Eigen::Index p = -1, q = -1;
            double best = -eps;
            for (Eigen::Index i = 0; i < n_ && !(bland && p >= 0); ++i) {
                for (Eigen::Index j = 0; j < m_; ++j) {
                    const double r = c_(i, j) - u[i] - v[j];
                    if (r < best) {
                        p = i;
                        q = j;
                        if (bland) break;
                        best = r;
                    }
                }
            }
            if (p < 0) break;
            const double theta = pivot(p, q, bland);
            degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
            ++pivots;
        }

        TransportPlan plan;
        plan.pivots = pivots;
        for (const auto& e : cells_) {
            if (!e.alive || e.flow <= 0.0) continue;
            plan.cost += e.flow * c_(e.row, e.col);
            plan.flows.push_back({e.row, e.col, e.flow});
        }
        return plan;
    }

private:
    Eigen::Index col_node(Eigen::Index j) const { return n_ + j; }

    void add_cell(Eigen::Index i, Eigen::Index j, double flow) {
        const auto id = cells_.size();
        cells_.push_back({i, j, flow, true});
        adj_[static_cast<std::size_t>(i)].push_back(id);
        adj_[static_cast<std::size_t>(col_node(j))].push_back(id);
    }

    void remove_cell(std::size_t id) {
        auto& e = cells_[id];
        e.alive = false;
        for (auto node : {e.row, col_node(e.col)}) {
            auto& lst = adj_[static_cast<std::size_t>(node)];
            lst.erase(std::find(lst.begin(), lst.end(), id));
        }
    }

    Eigen::Index other(const Basic& e, Eigen::Index node) const {
        return node == e.row ? col_node(e.col) : e.row;
    }

    void north_west(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        Eigen::VectorXd sa = a, sb = b;
        Eigen::Index i = 0, j = 0;
        while (i < n_ && j < m_) {
            const double f = std::min(sa[i], sb[j]);
            add_cell(i, j, f);
            sa[i] -= f;
            sb[j] -= f;
            if (i == n_ - 1 && j == m_ - 1) break;
            if ((sa[i] <= sb[j] && i < n_ - 1) || j == m_ - 1) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    void potentials(Eigen::VectorXd& u, Eigen::VectorXd& v) {
        std::vector<char> seen(static_cast<std::size_t>(n_ + m_), 0);
        std::vector<Eigen::Index> stack{0};
        u[0] = 0.0;
        seen[0] = 1;
        while (!stack.empty()) {
            const auto node = stack.back();
            stack.pop_back();
            for (auto id : adj_[static_cast<std::size_t>(node)]) {
                const auto& e = cells_[id];
                const auto nb = other(e, node);
                if (seen[static_cast<std::size_t>(nb)]) continue;
                seen[static_cast<std::size_t>(nb)] = 1;
                if (nb >= n_) {
                    v[nb - n_] = c_(e.row, e.col) - u[e.row];
                } else {
                    u[nb] = c_(e.row, e.col) - v[e.col];
                }
                stack.push_back(nb);
            }
        }
    }

    // Enter cell (p, q); returns the step length.
    double pivot(Eigen::Index p, Eigen::Index q, bool bland) {
        // Tree path from column node q back to row node p.
        const auto total = static_cast<std::size_t>(n_ + m_);
        std::vector<long> via(total, -1);
        std::vector<char> seen(total, 0);
        std::vector<Eigen::Index> queue{p};
        seen[static_cast<std::size_t>(p)] = 1;
        const auto target = col_node(q);
        for (std::size_t h = 0; h < queue.size() && !seen[static_cast<std::size_t>(target)]; ++h) {
            const auto node = queue[h];
            for (auto id : adj_[static_cast<std::size_t>(node)]) {
                const auto nb = other(cells_[id], node);
                if (seen[static_cast<std::size_t>(nb)]) continue;
                seen[static_cast<std::size_t>(nb)] = 1;
                via[static_cast<std::size_t>(nb)] = static_cast<long>(id);
                queue.push_back(nb);
            }
        }
        // Walk back from q to p: cells alternate -, +, -, ... starting next to q.
        std::vector<std::size_t> path;
        for (auto node = target; node != p;) {
            const auto id = static_cast<std::size_t>(via[static_cast<std::size_t>(node)]);
            path.push_back(id);
            node = other(cells_[id], node);
        }
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = path.front();
        for (std::size_t k = 0; k < path.size(); k += 2) {
            const auto& e = cells_[path[k]];
            const bool better = e.flow < theta ||
                                (bland && e.flow == theta &&
                                 (e.row * m_ + e.col) < (cells_[leave].row * m_ + cells_[leave].col));
            if (better) {
                theta = e.flow;
                leave = path[k];
            }
        }
        for (std::size_t k = 0; k < path.size(); ++k) {
            auto& e = cells_[path[k]];
            e.flow += (k % 2 == 0) ? -theta : theta;
            if (e.flow < 0.0) e.flow = 0.0;
        }
        remove_cell(leave);
        add_cell(p, q, theta);
        return theta;
    }

    const Eigen::MatrixXd& c_;
    Eigen::Index n_;
    Eigen::Index m_;
    std::vector<Basic> cells_;
    std::vector<std::vector<std::size_t>> adj_;
};

}  // namespace

TransportPlan solve_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (cost.rows() != a.size() || cost.cols() != b.size())
        throw DomainError("cost matrix shape differs from marginal sizes");
    if (a.size() == 0 || b.size() == 0) throw DomainError("transport marginals must be nonempty");
    if ((a.array() < 0).any() || (b.array() < 0).any()) throw DomainError("negative marginal mass");
    if (std::abs(a.sum() - b.sum()) > 1e-10) throw DomainError("unbalanced transport problem");
    TransportSimplex solver(cost, a, b);
    return solver.run();
}

}  // namespace wsub
