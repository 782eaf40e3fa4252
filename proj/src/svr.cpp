#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "ems/error.hpp"
#include "ems/regress.hpp"

namespace ems {

std::string_view to_string(KernelType k)
{
    return k == KernelType::Rbf ? "rbf" : "linear";
}

std::optional<KernelType> parse_kernel(std::string_view s)
{
    if (s == "rbf" || s == "RBF")
        return KernelType::Rbf;
    if (s == "linear")
        return KernelType::Linear;
    return std::nullopt;
}

void SvrParams::validate() const
{
    if (!(C > 0) || !std::isfinite(C))
        throw Error(ErrorCode::InvalidArgument, "C must be > 0");
    if (!(epsilon >= 0) || !std::isfinite(epsilon))
        throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
    if (!(gamma >= 0) || !std::isfinite(gamma))
        throw Error(ErrorCode::InvalidArgument, "gamma must be > 0 (0 selects the default)");
    if (!(tol > 0))
        throw Error(ErrorCode::InvalidArgument, "tol must be > 0");
}

namespace {

double kernel_value(KernelType k, double gamma, std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    if (k == KernelType::Linear) {
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * b[i];
        return s;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::exp(-gamma * s);
}

// Rows of K computed on demand; cached up to a byte budget.
class KernelRows {
public:
    KernelRows(const Matrix& z, KernelType k, double gamma, std::size_t budget_bytes)
        : z_(z), kernel_(k), gamma_(gamma), rows_(z.rows()),
          max_cached_(std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, z.rows() * sizeof(double))))
    {
        diag_.resize(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i)
            diag_[i] = kernel_value(k, gamma, z.row(i), z.row(i));
    }

    double diag(std::size_t i) const { return diag_[i]; }

    // `slot` selects the scratch buffer used when the row is not cached.
    const std::vector<double>& row(std::size_t i, int slot)
    {
        if (!rows_[i].empty())
            return rows_[i];
        std::vector<double>& dst = cached_ < max_cached_ ? rows_[i] : scratch_[slot];
        if (&dst == &rows_[i])
            ++cached_;
        dst.resize(z_.rows());
        const auto zi = z_.row(i);
        for (std::size_t t = 0; t < z_.rows(); ++t)
            dst[t] = kernel_value(kernel_, gamma_, zi, z_.row(t));
        return dst;
    }

private:
    const Matrix& z_;
    KernelType kernel_;
    double gamma_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> diag_;
    std::vector<double> scratch_[2];
    std::size_t max_cached_;
    std::size_t cached_ = 0;
};

struct Standardization {
    std::vector<double> mean, scale;
};

Standardization standardization(const Matrix& x, std::span<const double> weights, bool enabled)
{
    const std::size_t n = x.rows(), d = x.cols();
    Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    if (!enabled)
        return s;
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            m += x(i, j);
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v += (x(i, j) - m) * (x(i, j) - m);
        const double sd = std::sqrt(v / static_cast<double>(n));
        const double w = weights.empty() ? 1.0 : std::abs(weights[j]);
        s.mean[j] = m;
        // dividing by sd / w keeps the weight as the column's relative scale
        s.scale[j] = (sd > 1e-12 * (1.0 + std::abs(m)) && w > 0) ? sd / w : 1.0;
    }
    return s;
}

} // namespace

double Regressor::predict_raw(std::span<const double> row) const
{
    if (row.size() != arity)
        throw Error(ErrorCode::ArityMismatch,
                    "row has " + std::to_string(row.size()) + " values, regressor expects " + std::to_string(arity));
    std::vector<double> z(arity);
    for (std::size_t j = 0; j < arity; ++j)
        z[j] = (row[j] - mean[j]) / scale[j];
    double f = bias;
    for (std::size_t i = 0; i < coef.size(); ++i)
        f += coef[i] * kernel_value(kernel, gamma, support.row(i), z);
    return f;
}

double Regressor::predict(std::span<const double> row) const
{
    return std::clamp(predict_raw(row), -1.0, 1.0);
}

double predict(const Regressor& r, std::span<const double> row)
{
    return r.predict(row);
}

Regressor train_svr(const Matrix& x, std::span<const double> targets, const SvrParams& p,
                    std::span<const double> column_weights)
{
    p.validate();
    const std::size_t l = x.rows(), d = x.cols();
    if (l < 2)
        throw Error(ErrorCode::TooFewRows, "SVR needs at least 2 rows, got " + std::to_string(l));
    if (targets.size() != l)
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(targets.size()) + " targets for " + std::to_string(l) + " rows");
    if (!column_weights.empty() && column_weights.size() != d)
        throw Error(ErrorCode::LengthMismatch, "column weights do not match the column count");
    for (std::size_t i = 0; i < l; ++i) {
        if (!std::isfinite(targets[i]) || std::abs(targets[i]) > 1.0 + 1e-9)
            throw Error(ErrorCode::OutOfRange, "target (" + std::to_string(i) + ", " + std::to_string(targets[i]) + ")");
    }

    Regressor r;
    r.kernel = p.kernel;
    r.C = p.C;
    r.epsilon = p.epsilon;
    r.arity = d;
    auto st = standardization(x, column_weights, p.standardize);
    r.mean = std::move(st.mean);
    r.scale = std::move(st.scale);

    Matrix z(l, d);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < d; ++j)
            z(i, j) = (x(i, j) - r.mean[j]) / r.scale[j];

    if (p.gamma > 0) {
        r.gamma = p.gamma;
    } else {
        double var_sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0, v = 0.0;
            for (std::size_t i = 0; i < l; ++i)
                m += z(i, j);
            m /= static_cast<double>(l);
            for (std::size_t i = 0; i < l; ++i)
                v += (z(i, j) - m) * (z(i, j) - m);
            var_sum += v / static_cast<double>(l);
        }
        const double mean_var = d ? var_sum / static_cast<double>(d) : 0.0;
        r.gamma = mean_var > 0 ? 1.0 / (static_cast<double>(d) * mean_var) : 1.0 / std::max<std::size_t>(d, 1);
    }

    // Dual over beta = (alpha, alpha*), 2l variables:
    //   min 1/2 beta' Q beta + p' beta,  y' beta = 0,  0 <= beta <= C
    // with y = (+1.., -1..), p = (eps - t, eps + t), Q_ij = y_i y_j K(i mod l, j mod l).
    const std::size_t N = 2 * l;
    const double C = p.C;
    const double tau = 1e-12;
    KernelRows K(z, p.kernel, r.gamma, p.cache_mb * 1024 * 1024);
    std::vector<double> alpha(N, 0.0), G(N);
    std::vector<signed char> y(N);
    for (std::size_t i = 0; i < l; ++i) {
        y[i] = 1;
        y[i + l] = -1;
        G[i] = p.epsilon - targets[i];
        G[i + l] = p.epsilon + targets[i];
    }
    auto kidx = [l](std::size_t t) { return t < l ? t : t - l; };

    const std::size_t max_iter = p.max_iter ? p.max_iter : 10 * l;
    double objective = 0.0;
    r.report.objective.push_back(objective);
    std::size_t iter = 0;
    bool converged = false;
    double violation = 0.0;

    while (true) {
        // i: maximal violating index in the "up" set
        double gmax = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < N; ++t) {
            if (y[t] == 1) {
                if (alpha[t] < C && -G[t] >= gmax) {
                    gmax = -G[t];
                    i = static_cast<std::ptrdiff_t>(t);
                }
            } else if (alpha[t] > 0 && G[t] >= gmax) {
                gmax = G[t];
                i = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (i < 0) {
            converged = true;
            violation = 0.0;
            break;
        }
        const std::size_t ii = static_cast<std::size_t>(i);
        const auto& Ki = K.row(kidx(ii), 0);
        const double Kii = K.diag(kidx(ii));

        // j: second-order choice in the "low" set
        double gmax2 = -std::numeric_limits<double>::infinity();
        double obj_min = std::numeric_limits<double>::infinity();
        std::ptrdiff_t j = -1;
        for (std::size_t t = 0; t < N; ++t) {
            double grad_diff;
            if (y[t] == 1) {
                if (!(alpha[t] > 0))
                    continue;
                grad_diff = gmax + G[t];
                gmax2 = std::max(gmax2, G[t]);
            } else {
                if (!(alpha[t] < C))
                    continue;
                grad_diff = gmax - G[t];
                gmax2 = std::max(gmax2, -G[t]);
            }
            if (grad_diff > 0) {
                double quad = Kii + K.diag(kidx(t)) - 2.0 * Ki[kidx(t)];
                if (quad <= 0)
                    quad = tau;
                const double o = -(grad_diff * grad_diff) / quad;
                if (o <= obj_min) {
                    obj_min = o;
                    j = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        violation = gmax + gmax2;
        if (violation < p.tol || j < 0) {
            converged = true;
            break;
        }
        if (iter >= max_iter)
            break;
        ++iter;

        const std::size_t jj = static_cast<std::size_t>(j);
        const auto& Kj = K.row(kidx(jj), 1);
        const double Kjj = K.diag(kidx(jj));
        const double Kij = Ki[kidx(jj)];
        const double old_i = alpha[ii], old_j = alpha[jj];
        const double Gi = G[ii], Gj = G[jj];

        if (y[ii] != y[jj]) {
            double quad = Kii + Kjj - 2.0 * Kij;
            if (quad <= 0)
                quad = tau;
            const double delta = (-Gi - Gj) / quad;
            const double diff = alpha[ii] - alpha[jj];
            alpha[ii] += delta;
            alpha[jj] += delta;
            if (diff > 0) {
                if (alpha[jj] < 0) {
                    alpha[jj] = 0;
                    alpha[ii] = diff;
                }
            } else if (alpha[ii] < 0) {
                alpha[ii] = 0;
                alpha[jj] = -diff;
            }
            if (diff > 0) {
                if (alpha[ii] > C) {
                    alpha[ii] = C;
                    alpha[jj] = C - diff;
                }
            } else if (alpha[jj] > C) {
                alpha[jj] = C;
                alpha[ii] = C + diff;
            }
        } else {
            double quad = Kii + Kjj - 2.0 * Kij;
            if (quad <= 0)
                quad = tau;
            const double delta = (Gi - Gj) / quad;
            const double sum = alpha[ii] + alpha[jj];
            alpha[ii] -= delta;
            alpha[jj] += delta;
            if (sum > C) {
                if (alpha[ii] > C) {
                    alpha[ii] = C;
                    alpha[jj] = sum - C;
                }
            } else if (alpha[jj] < 0) {
                alpha[jj] = 0;
                alpha[ii] = sum;
            }
            if (sum > C) {
                if (alpha[jj] > C) {
                    alpha[jj] = C;
                    alpha[ii] = sum - C;
                }
            } else if (alpha[ii] < 0) {
                alpha[ii] = 0;
                alpha[jj] = sum;
            }
        }

        const double di = alpha[ii] - old_i, dj = alpha[jj] - old_j;
        const double yi = y[ii], yj = y[jj];
        for (std::size_t t = 0; t < N; ++t) {
            const std::size_t k = kidx(t);
            G[t] += y[t] * (yi * Ki[k] * di + yj * Kj[k] * dj);
        }
        objective += Gi * di + Gj * dj + 0.5 * (Kii * di * di + Kjj * dj * dj) + yi * yj * Kij * di * dj;
        r.report.objective.push_back(objective);
    }

    // bias: average of y*G over free variables, else the midpoint of the bounds
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < N; ++t) {
        const double yG = y[t] * G[t];
        if (alpha[t] >= C) {
            if (y[t] == -1)
                ub = std::min(ub, yG);
            else
                lb = std::max(lb, yG);
        } else if (alpha[t] <= 0) {
            if (y[t] == 1)
                ub = std::min(ub, yG);
            else
                lb = std::max(lb, yG);
        } else {
            ++n_free;
            sum_free += yG;
        }
    }
    const double rho = n_free ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    r.bias = -rho;

    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < l; ++i) {
        const double c = alpha[i] - alpha[i + l];
        if (c != 0.0) {
            sv.push_back(i);
            r.coef.push_back(c);
        }
    }
    r.support = z.select_rows(sv);
    if (sv.empty())
        r.support = Matrix(0, d);
    r.report.iterations = iter;
    r.report.converged = converged;
    r.report.violation = violation;
    return r;
}

Regressor train_svr(const DesignMatrix& m, std::span<const double> targets, const SvrParams& p)
{
    return train_svr(m.values, targets, p, m.weights);
}

nlohmann::json to_json(const Regressor& r)
{
    std::vector<double> support(r.support.data().begin(), r.support.data().end());
    return {{"kernel", std::string(to_string(r.kernel))},
            {"gamma", r.gamma},
            {"C", r.C},
            {"epsilon", r.epsilon},
            {"arity", r.arity},
            {"bias", r.bias},
            {"mean", r.mean},
            {"scale", r.scale},
            {"coef", r.coef},
            {"support", support},
            {"iterations", r.report.iterations},
            {"converged", r.report.converged}};
}

Regressor regressor_from_json(const nlohmann::json& j)
{
    try {
        Regressor r;
        auto k = parse_kernel(j.at("kernel").get<std::string>());
        if (!k)
            throw Error(ErrorCode::InvalidArgument, "unknown kernel");
        r.kernel = *k;
        r.gamma = j.at("gamma");
        r.C = j.at("C");
        r.epsilon = j.at("epsilon");
        r.arity = j.at("arity");
        r.bias = j.at("bias");
        r.mean = j.at("mean").get<std::vector<double>>();
        r.scale = j.at("scale").get<std::vector<double>>();
        r.coef = j.at("coef").get<std::vector<double>>();
        const auto support = j.at("support").get<std::vector<double>>();
        if (r.mean.size() != r.arity || r.scale.size() != r.arity || support.size() != r.coef.size() * r.arity)
            throw Error(ErrorCode::InvalidArgument, "inconsistent regressor arrays");
        r.support = Matrix(r.coef.size(), r.arity);
        for (std::size_t i = 0; i < r.coef.size(); ++i)
            for (std::size_t c = 0; c < r.arity; ++c)
                r.support(i, c) = support[i * r.arity + c];
        r.report.iterations = j.at("iterations");
        r.report.converged = j.at("converged");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("regressor document: ") + e.what());
    }
}

} // namespace ems
