#include <algorithm>
#include <cmath>
#include <numeric>

#include "seqnas/errors.hpp"
#include "seqnas/surrogate.hpp"

namespace seqnas::gbdt {

namespace {

// Median of an ascending range; mean of the middle pair for even sizes.
double sorted_median(std::span<const double> sorted)
{
    const std::size_t n = sorted.size();
    if (n == 0)
        return 0.0;
    return n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double median_of(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    return sorted_median(v);
}

// Sum of absolute deviations from the median of an ascending range.
double sorted_sad(std::span<const double> sorted)
{
    const std::size_t n = sorted.size();
    double s = 0.0;
    for (std::size_t k = 0; k < n / 2; ++k)
        s -= sorted[k];
    for (std::size_t k = (n + 1) / 2; k < n; ++k)
        s += sorted[k];
    return s;
}

class TreeGrower {
public:
    TreeGrower(const std::vector<std::uint8_t>& columns, std::size_t n, std::size_t features,
               const std::vector<double>& residual, const GbdtParams& params)
        : columns_(columns), n_(n), features_(features), residual_(residual), params_(params)
    {
    }

    Tree grow(std::vector<double>& leaf_of_row)
    {
        std::vector<std::uint32_t> order(n_);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return residual_[a] < residual_[b]; });
        leaf_of_row_ = &leaf_of_row;
        tree_.nodes.clear();
        build(order, 0);
        return std::move(tree_);
    }

private:
    int build(const std::vector<std::uint32_t>& sorted_rows, int depth)
    {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        const std::size_t m = sorted_rows.size();
        values_.resize(m);
        for (std::size_t k = 0; k < m; ++k)
            values_[k] = residual_[sorted_rows[k]];
        const double leaf_value = sorted_median(values_);
        const double parent_sad = sorted_sad(values_);
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);

        int best_feature = -1;
        double best_gain = 1e-12 * std::max(1.0, parent_sad);
        if (depth < params_.max_depth && m >= 2 * min_leaf && parent_sad > 0.0) {
            for (std::size_t f = 0; f < features_; ++f) {
                const std::uint8_t* col = columns_.data() + f * n_;
                std::size_t ones = 0;
                for (auto r : sorted_rows)
                    ones += col[r];
                const std::size_t zeros = m - ones;
                if (ones < min_leaf || zeros < min_leaf)
                    continue;
                // Rank within each side decides whether a value counts
                // below (-) or above (+) that side's median.
                const std::size_t lo[2] = {zeros / 2, ones / 2};
                const std::size_t hi[2] = {(zeros + 1) / 2, (ones + 1) / 2};
                std::size_t rank[2] = {0, 0};
                double sad = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const int side = col[sorted_rows[k]];
                    const std::size_t r = rank[side]++;
                    if (r < lo[side])
                        sad -= values_[k];
                    else if (r >= hi[side])
                        sad += values_[k];
                }
                const double gain = parent_sad - sad;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                }
            }
        }

        if (best_feature < 0) {
            tree_.nodes[id].value = leaf_value;
            for (auto r : sorted_rows)
                (*leaf_of_row_)[r] = leaf_value;
            return id;
        }

        std::vector<std::uint32_t> left, right;
        const std::uint8_t* col = columns_.data() + static_cast<std::size_t>(best_feature) * n_;
        for (auto r : sorted_rows)
            (col[r] ? right : left).push_back(r);
        tree_.nodes[id].feature = best_feature;
        tree_.nodes[id].value = leaf_value;
        const int l = build(left, depth + 1);
        const int rr = build(right, depth + 1);
        tree_.nodes[id].left = l;
        tree_.nodes[id].right = rr;
        return id;
    }

    const std::vector<std::uint8_t>& columns_;
    std::size_t n_;
    std::size_t features_;
    const std::vector<double>& residual_;
    const GbdtParams& params_;
    Tree tree_;
    std::vector<double> values_;
    std::vector<double>* leaf_of_row_ = nullptr;
};

double mean_abs(const std::vector<double>& y, const std::vector<double>& f)
{
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        s += std::abs(y[i] - f[i]);
    return y.empty() ? 0.0 : s / static_cast<double>(y.size());
}

}  // namespace

double Tree::predict(const std::uint8_t* row) const
{
    int i = 0;
    while (nodes[i].feature >= 0)
        i = row[nodes[i].feature] ? nodes[i].right : nodes[i].left;
    return nodes[i].value;
}

double Booster::predict(const std::uint8_t* row) const
{
    double f = base;
    for (const auto& t : trees)
        f += learning_rate * t.predict(row);
    return f;
}

Booster fit_lad(const BinaryMatrix& x, std::span<const double> y, const GbdtParams& params,
                std::vector<double>* train_mae)
{
    if (x.rows != y.size())
        throw ShapeError("feature rows and targets differ in length");
    const std::size_t n = x.rows;

    // Feature-major copy keeps each split scan inside one small column.
    std::vector<std::uint8_t> columns(n * x.cols);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < x.cols; ++f)
            columns[f * n + i] = x.data[i * x.cols + f];

    const std::vector<double> target(y.begin(), y.end());
    Booster booster;
    booster.learning_rate = params.learning_rate;
    booster.base = median_of(target);

    std::vector<double> fitted(n, booster.base);
    std::vector<double> residual(n);
    std::vector<double> leaf_of_row(n);
    if (train_mae)
        train_mae->assign(1, mean_abs(target, fitted));

    for (int t = 0; t < params.trees; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            residual[i] = target[i] - fitted[i];
        TreeGrower grower(columns, n, x.cols, residual, params);
        booster.trees.push_back(grower.grow(leaf_of_row));
        for (std::size_t i = 0; i < n; ++i)
            fitted[i] += params.learning_rate * leaf_of_row[i];
        if (train_mae)
            train_mae->push_back(mean_abs(target, fitted));
    }
    return booster;
}

}  // namespace seqnas::gbdt
