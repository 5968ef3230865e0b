#include "edgepower/mc_kld.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>

#include "edgepower/errors.hpp"
#include "edgepower/rng.hpp"
#include "sampling_detail.hpp"

namespace edgepower {

int resolve_threads() {
    if (const char* env = std::getenv("EDGEPOWER_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) {
            return static_cast<int>(std::min<long>(v, 1024));
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pair_count(std::int64_t p) {
    return 0.5 * static_cast<double>(p) * static_cast<double>(p - 1);
}

void validate_mc(const McConfig& cfg) {
    if (cfg.n_samples < 100) {
        throw DomainError("n_samples too small (>= 100 required)");
    }
    if (cfg.chunk_size < 1) {
        throw DomainError("chunk_size must be >= 1");
    }
}

// Runs kernel(block, rows, out + offset) over all seed blocks. Blocks are
// independent and land in disjoint slots of the result, so scheduling (thread
// count, chunk size) cannot change any value; the final reduction is a single
// in-order pass.
template <typename Kernel>
std::vector<double> run_blocks(std::int64_t n, std::int64_t chunk_size, Kernel&& kernel) {
    const auto bl = static_cast<std::int64_t>(kSeedBlock);
    const std::int64_t nblocks = (n + bl - 1) / bl;
    const std::int64_t blocks_per_task = std::max<std::int64_t>(1, (chunk_size + bl - 1) / bl);
    std::vector<double> values(static_cast<std::size_t>(n));
    std::atomic<std::int64_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            const std::int64_t start = cursor.fetch_add(blocks_per_task);
            if (start >= nblocks) {
                break;
            }
            const std::int64_t stop = std::min(nblocks, start + blocks_per_task);
            for (std::int64_t b = start; b < stop; ++b) {
                const std::int64_t lo = b * bl;
                const std::int64_t rows = std::min(bl, n - lo);
                kernel(static_cast<std::uint64_t>(b), rows, values.data() + lo);
            }
        }
    };
    const int threads = static_cast<int>(
        std::min<std::int64_t>(resolve_threads(), nblocks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads - 1);
        for (int t = 0; t < threads - 1; ++t) {
            pool.emplace_back(worker);
        }
        worker();
        for (auto& th : pool) {
            th.join();
        }
    }
    return values;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

KldResult summarize_mc(const std::vector<double>& values, std::optional<RhoRegime> regime) {
    const auto n = static_cast<std::int64_t>(values.size());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) {
        const double d = v - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    KldResult out;
    out.value = mean;
    out.mc_stderr = std::sqrt(var / static_cast<double>(n));
    out.method = Method::MonteCarlo;
    out.regime = regime;
    out.valid = true;
    if (regime && !regime->minor_term_finite_variance) {
        out.heavy_tail = true;
        std::vector<double> sorted(values);
        std::sort(sorted.begin(), sorted.end());
        const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
        out.iqr_stderr = iqr / 1.349 / std::sqrt(static_cast<double>(n));
    }
    return out;
}

// Exact maximum of -rho x_u x_v over pairs u < v, from the two smallest and
// two largest coordinates: the extreme pair product is always formed from
// {smallest two, smallest x largest, largest two}.
struct RowExtremes {
    double s1 = kInf, s2 = kInf;    // two smallest
    double l1 = -kInf, l2 = -kInf;  // two largest

    void update(double v) {
        if (v <= s1) {
            s2 = s1;
            s1 = v;
        } else if (v < s2) {
            s2 = v;
        }
        if (v >= l1) {
            l2 = l1;
            l1 = v;
        } else if (v > l2) {
            l2 = v;
        }
    }

    double min_pair_product() const {
        return std::min({s1 * s2, s1 * l1, l1 * l2});
    }
    double max_pair_product() const {
        return std::max(s1 * s2, l1 * l2);
    }
};

void shifted_pair_max(const Eigen::MatrixXd& x, std::int64_t rows, double rho,
                      Eigen::ArrayXd& m) {
    const auto p = x.cols();
    std::vector<RowExtremes> ext(static_cast<std::size_t>(rows));
    for (Eigen::Index j = 0; j < p; ++j) {
        const double* col = x.col(j).data();
        for (std::int64_t i = 0; i < rows; ++i) {
            ext[static_cast<std::size_t>(i)].update(col[i]);
        }
    }
    for (std::int64_t i = 0; i < rows; ++i) {
        const auto& e = ext[static_cast<std::size_t>(i)];
        if (rho > 0.0) {
            m[i] = -rho * e.min_pair_product();
        } else if (rho < 0.0) {
            m[i] = -rho * e.max_pair_product();
        } else {
            m[i] = 0.0;
        }
    }
}

}  // namespace

KldResult estimate_mixture_kld(int p, double rho, const McConfig& cfg) {
    if (p < 3) {
        throw DomainError("p must be >= 3 for the mixture estimator");
    }
    if (p > cfg.dense_cap) {
        throw DomainError("p exceeds the configured dense cap");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for the mixture estimator");
    }
    validate_mc(cfg);
    const double log_pairs = std::log(pair_count(p));
    const double shift = 0.5 * std::log1p(-rho * rho) - log_pairs;
    auto kernel = [&](std::uint64_t b, std::int64_t rows, double* out) {
        Eigen::MatrixXd x(kSeedBlock, p);
        detail::fill_mixture_block(rho, cfg.seed, b, x);
        Eigen::ArrayXd m(rows);
        shifted_pair_max(x, rows, rho, m);
        Eigen::ArrayXd s = Eigen::ArrayXd::Zero(rows);
        Eigen::ArrayXd coef(rows);
        for (int u = 0; u + 1 < p; ++u) {
            coef = (-rho) * x.col(u).head(rows).array();
            for (int v = u + 1; v < p; ++v) {
                s += (coef * x.col(v).head(rows).array() - m).exp();
            }
        }
        for (std::int64_t i = 0; i < rows; ++i) {
            out[i] = shift + m[i] + std::log(s[i]);
        }
    };
    auto values = run_blocks(cfg.n_samples, cfg.chunk_size, kernel);
    return summarize_mc(values, classify_regime(rho));
}

KldResult estimate_covariance_mixture_kld(int p, double rho, const McConfig& cfg) {
    if (p < 3) {
        throw DomainError("p must be >= 3 for the covariance-mixture estimator");
    }
    if (p > cfg.dense_cap) {
        throw DomainError("p exceeds the configured dense cap");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for the covariance-mixture estimator");
    }
    validate_mc(cfg);
    const double r2 = rho * rho;
    const double inv = 1.0 / (1.0 - r2);
    const double a = rho * inv;
    const double half_sq = 0.5 * r2 * inv;
    const double shift = -0.5 * std::log1p(-r2) - std::log(pair_count(p));
    auto kernel = [&](std::uint64_t b, std::int64_t rows, double* out) {
        Eigen::MatrixXd x(kSeedBlock, p);
        detail::fill_covariance_edge_block(rho, cfg.seed, b, x);
        // w_u = rho^2 x_u^2 / (2(1-rho^2)); pair term is a x_u x_v - w_u - w_v.
        Eigen::MatrixXd w = (x.topRows(rows).array().square() * half_sq).matrix();
        Eigen::ArrayXd m = Eigen::ArrayXd::Constant(rows, -kInf);
        for (int u = 0; u + 1 < p; ++u) {
            const auto xu = x.col(u).head(rows).array();
            const auto wu = w.col(u).array();
            for (int v = u + 1; v < p; ++v) {
                m = m.max(a * xu * x.col(v).head(rows).array() - wu - w.col(v).array());
            }
        }
        Eigen::ArrayXd s = Eigen::ArrayXd::Zero(rows);
        for (int u = 0; u + 1 < p; ++u) {
            const auto xu = x.col(u).head(rows).array();
            const auto wu = w.col(u).array();
            for (int v = u + 1; v < p; ++v) {
                s += (a * xu * x.col(v).head(rows).array() - wu - w.col(v).array() - m).exp();
            }
        }
        for (std::int64_t i = 0; i < rows; ++i) {
            out[i] = shift + m[i] + std::log(s[i]);
        }
    };
    auto values = run_blocks(cfg.n_samples, cfg.chunk_size, kernel);
    return summarize_mc(values, classify_regime(rho));
}

KldResult estimate_kld_oracle(const GaussianModel& f1, const GaussianModel& f0,
                              const McConfig& cfg) {
    if (f1.dim() != f0.dim()) {
        throw DimensionError("models have different dimensions");
    }
    validate_mc(cfg);
    const int p = f1.dim();
    const double log_det_term = f0.log_det_covariance() - f1.log_det_covariance();
    auto kernel = [&](std::uint64_t b, std::int64_t rows, double* out) {
        Eigen::MatrixXd x(kSeedBlock, p);
        detail::fill_model_block(f1, cfg.seed, b, x);
        Eigen::MatrixXd d1 = (x.topRows(rows).rowwise() - f1.mean().transpose()).transpose();
        Eigen::MatrixXd d0 = (x.topRows(rows).rowwise() - f0.mean().transpose()).transpose();
        f1.chol().matrixL().solveInPlace(d1);
        f0.chol().matrixL().solveInPlace(d0);
        for (std::int64_t i = 0; i < rows; ++i) {
            const double q1 = d1.col(i).squaredNorm();
            const double q0 = d0.col(i).squaredNorm();
            out[i] = 0.5 * (log_det_term + q0 - q1);
        }
    };
    auto values = run_blocks(cfg.n_samples, cfg.chunk_size, kernel);
    return summarize_mc(values, std::nullopt);
}

KldResult estimate_mixture_kld_bruteforce(int p, double rho, const McConfig& cfg) {
    if (p < 3) {
        throw DomainError("p must be >= 3 for the brute-force estimator");
    }
    if (p > 100) {
        throw DomainError("brute-force estimator is limited to p <= 100");
    }
    if (!(std::abs(rho) < 1.0)) {
        throw DomainError("|rho| must be < 1 for the brute-force estimator");
    }
    validate_mc(cfg);
    const double r2 = rho * rho;
    const std::int64_t pairs = static_cast<std::int64_t>(p) * (p - 1) / 2;
    const double half_log_det = 0.5 * std::log1p(-r2);
    const double scale = 1.0 / std::sqrt(1.0 - r2);          // sqrt of block variance
    const double chol21 = -rho * scale;                      // L(2,1) of the edge block
    const double chol22 = std::sqrt(1.0 - r2) * scale;       // L(2,2)
    const double log_norm = -0.5 * static_cast<double>(p) * std::log(2.0 * M_PI);
    auto kernel = [&](std::uint64_t b, std::int64_t rows, double* out) {
        std::mt19937_64 engine = block_engine(cfg.seed, b);
        std::uniform_int_distribution<std::int64_t> edge_pick(0, pairs - 1);
        std::normal_distribution<double> normal;
        std::vector<double> x(static_cast<std::size_t>(p));
        std::vector<double> comps(static_cast<std::size_t>(pairs));
        for (std::int64_t i = 0; i < rows; ++i) {
            // Honest mixture draw: uniform edge, then that component.
            std::int64_t e = edge_pick(engine);
            int u = 0;
            while (e >= p - 1 - u) {
                e -= p - 1 - u;
                ++u;
            }
            const int v = u + 1 + static_cast<int>(e);
            for (int j = 0; j < p; ++j) {
                x[static_cast<std::size_t>(j)] = normal(engine);
            }
            const double zu = x[static_cast<std::size_t>(u)];
            const double zv = x[static_cast<std::size_t>(v)];
            x[static_cast<std::size_t>(u)] = scale * zu;
            x[static_cast<std::size_t>(v)] = chol21 * zu + chol22 * zv;
            double xx = 0.0;
            for (int j = 0; j < p; ++j) {
                xx += x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
            }
            // Mixture density by direct summation of all component densities.
            std::size_t k = 0;
            double cmax = -kInf;
            for (int a = 0; a < p; ++a) {
                for (int c = a + 1; c < p; ++c) {
                    const double lp = log_norm + half_log_det -
                                      0.5 * (xx + 2.0 * rho *
                                             x[static_cast<std::size_t>(a)] *
                                             x[static_cast<std::size_t>(c)]);
                    comps[k++] = lp;
                    cmax = std::max(cmax, lp);
                }
            }
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                acc += std::exp(comps[j] - cmax);
            }
            const double log_f1 = cmax + std::log(acc) - std::log(static_cast<double>(pairs));
            const double log_f0 = log_norm - 0.5 * xx;
            out[i] = log_f1 - log_f0;
        }
    };
    auto values = run_blocks(cfg.n_samples, cfg.chunk_size, kernel);
    return summarize_mc(values, classify_regime(rho));
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, KldResult>>& series) {
    if (series.size() < 3) {
        throw DomainError("slope fit needs at least 3 points");
    }
    SlopeFit fit;
    fit.points.reserve(series.size());
    for (const auto& [p, r] : series) {
        if (!(p > 0.0)) {
            throw DomainError("slope fit needs positive p");
        }
        if (!(r.value > 0.0)) {
            throw DomainError("slope fit needs strictly positive divergence estimates");
        }
        fit.points.emplace_back(std::log(p), std::log(r.value));
    }
    for (std::size_t i = 0; i < fit.points.size(); ++i) {
        for (std::size_t j = i + 1; j < fit.points.size(); ++j) {
            if (fit.points[i].first == fit.points[j].first) {
                throw DomainError("slope fit needs distinct p values");
            }
        }
    }
    const auto k = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : fit.points) {
        mx += x;
        my += y;
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (const auto& [x, y] : fit.points) {
        const double r = y - (fit.intercept + fit.slope * x);
        sse += r * r;
    }
    fit.slope_stderr = std::sqrt(sse / (k - 2.0) / sxx);
    return fit;
}

FigureSeries figure1_series(double rho, const std::vector<std::int64_t>& p_grid,
                            const McConfig& cfg) {
    if (p_grid.empty()) {
        throw DomainError("figure grid must not be empty");
    }
    FigureSeries series;
    series.rho = rho;
    series.seed = cfg.seed;
    series.rows.reserve(p_grid.size());
    for (std::int64_t p : p_grid) {
        McConfig sub = cfg;
        sub.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(p));
        const KldResult mc = estimate_mixture_kld(static_cast<int>(p), rho, sub);
        const KldResult approx = kld_mixture_approx(rho, p);
        FigureRow row;
        row.p = p;
        row.mc_kld = mc.value;
        row.mc_stderr = *mc.mc_stderr;
        row.approx_kld = approx.value;
        row.approx_valid = approx.valid;
        series.rows.push_back(row);
        series.heavy_tail = series.heavy_tail || mc.heavy_tail;
    }
    return series;
}

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string FigureSeries::to_csv() const {
    std::string out = "p,mc_kld,mc_stderr,approx_kld,approx_valid\n";
    for (const FigureRow& r : rows) {
        out += std::to_string(r.p);
        out += ',';
        out += format_g17(r.mc_kld);
        out += ',';
        out += format_g17(r.mc_stderr);
        out += ',';
        out += format_g17(r.approx_kld);
        out += ',';
        out += r.approx_valid ? "true" : "false";
        out += '\n';
    }
    return out;
}

nlohmann::json FigureSeries::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const FigureRow& r : rows) {
        arr.push_back({{"p", r.p},
                       {"mc_kld", r.mc_kld},
                       {"mc_stderr", r.mc_stderr},
                       {"approx_kld", r.approx_kld},
                       {"approx_valid", r.approx_valid}});
    }
    return arr;
}

}  // namespace edgepower
