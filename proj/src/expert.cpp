#include "unite/expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace unite {

// --------------------------------------------------------------------------
// Condition

const Condition& Condition::null() {
    static const Condition c;
    return c;
}

Condition Condition::label(int id) {
    if (id < 0) throw std::invalid_argument("label ids are non-negative");
    Condition c;
    c.kind_ = Kind::label;
    c.label_ = id;
    return c;
}

Condition Condition::embedding(std::vector<double> values) {
    if (values.empty())
        throw std::invalid_argument("embedding condition must be non-empty");
    Condition c;
    c.kind_ = Kind::embedding;
    c.embedding_ = std::move(values);
    return c;
}

int Condition::label_id() const {
    if (kind_ != Kind::label)
        throw std::logic_error("condition is not a label");
    return label_;
}

const std::vector<double>& Condition::embedding_values() const {
    if (kind_ != Kind::embedding)
        throw std::logic_error("condition is not an embedding");
    return embedding_;
}

bool Condition::operator==(const Condition& other) const {
    if (kind_ != other.kind_) return false;
    switch (kind_) {
        case Kind::null_cond: return true;
        case Kind::label: return label_ == other.label_;
        case Kind::embedding: return embedding_ == other.embedding_;
    }
    return false;
}

bool Condition::operator<(const Condition& other) const {
    if (kind_ != other.kind_) return kind_ < other.kind_;
    switch (kind_) {
        case Kind::null_cond: return false;
        case Kind::label: return label_ < other.label_;
        case Kind::embedding: return embedding_ < other.embedding_;
    }
    return false;
}

std::string Condition::describe() const {
    switch (kind_) {
        case Kind::null_cond: return "null";
        case Kind::label: return "label(" + std::to_string(label_) + ")";
        case Kind::embedding:
            return "embedding[" + std::to_string(embedding_.size()) + "]";
    }
    return "?";
}

// --------------------------------------------------------------------------
// Expert base

std::vector<double> Expert::epsilon(const std::vector<double>& z_t,
                                    const Condition& cond, int t,
                                    const NoiseSchedule& schedule) const {
    std::vector<double> out(static_cast<std::size_t>(dim()));
    epsilon(z_t, cond, t, schedule, out);
    return out;
}

void Expert::epsilon_batch(const double* z_rows, std::size_t count,
                           const Condition& cond, int t,
                           const NoiseSchedule& schedule,
                           double* out_rows) const {
    const auto d = static_cast<std::size_t>(dim());
    for (std::size_t i = 0; i < count; ++i)
        epsilon({z_rows + i * d, d}, cond, t, schedule, {out_rows + i * d, d});
}

// --------------------------------------------------------------------------
// Closed forms

namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

void gaussian_marginal_epsilon(std::span<const double> mu,
                               std::span<const double> sigma,
                               const NoiseSchedule& schedule, int t,
                               std::span<const double> z_t,
                               std::span<double> out) {
    check_dim(sigma.size(), mu.size(), "gaussian_marginal_epsilon");
    check_dim(z_t.size(), mu.size(), "gaussian_marginal_epsilon");
    check_dim(out.size(), mu.size(), "gaussian_marginal_epsilon");
    const double abar = schedule.alpha_bar(t);
    const double sa = std::sqrt(abar);
    const double root1m = std::sqrt(1.0 - abar);
    for (std::size_t d = 0; d < mu.size(); ++d) {
        const double var = abar * sigma[d] * sigma[d] + (1.0 - abar);
        out[d] = root1m * (z_t[d] - sa * mu[d]) / var;
    }
}

double gmm_diffused_log_density(std::span<const GmmComponent> components,
                                const NoiseSchedule& schedule, int t,
                                std::span<const double> z_t) {
    const double abar = schedule.alpha_bar(t);
    const double sa = std::sqrt(abar);
    constexpr double kLog2Pi = 1.8378770664093454836;
    double max_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> lls(components.size());
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        double ll = std::log(c.weight);
        for (std::size_t d = 0; d < z_t.size(); ++d) {
            const double var = abar * c.sigma[d] * c.sigma[d] + (1.0 - abar);
            const double r = z_t[d] - sa * c.mu[d];
            ll += -0.5 * (kLog2Pi + std::log(var)) - r * r / (2.0 * var);
        }
        lls[k] = ll;
        max_ll = std::max(max_ll, ll);
    }
    double acc = 0.0;
    for (double ll : lls) acc += std::exp(ll - max_ll);
    return max_ll + std::log(acc);
}

void gmm_marginal_epsilon(std::span<const GmmComponent> components,
                          const NoiseSchedule& schedule, int t,
                          std::span<const double> z_t, std::span<double> out) {
    if (components.empty())
        throw std::invalid_argument("gmm_marginal_epsilon: empty mixture");
    check_dim(out.size(), z_t.size(), "gmm_marginal_epsilon");
    const double abar = schedule.alpha_bar(t);
    const double sa = std::sqrt(abar);
    const double root1m = std::sqrt(1.0 - abar);

    // responsibilities in log space
    constexpr double kLog2Pi = 1.8378770664093454836;
    std::vector<double> lls(components.size());
    double max_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        double ll = std::log(c.weight);
        for (std::size_t d = 0; d < z_t.size(); ++d) {
            const double var = abar * c.sigma[d] * c.sigma[d] + (1.0 - abar);
            const double r = z_t[d] - sa * c.mu[d];
            ll += -0.5 * (kLog2Pi + std::log(var)) - r * r / (2.0 * var);
        }
        lls[k] = ll;
        max_ll = std::max(max_ll, ll);
    }
    double norm = 0.0;
    for (double ll : lls) norm += std::exp(ll - max_ll);

    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        const double resp = std::exp(lls[k] - max_ll) / norm;
        for (std::size_t d = 0; d < z_t.size(); ++d) {
            const double var = abar * c.sigma[d] * c.sigma[d] + (1.0 - abar);
            // component score is -(z - m)/var; epsilon flips the sign
            out[d] += resp * root1m * (z_t[d] - sa * c.mu[d]) / var;
        }
    }
}

// --------------------------------------------------------------------------
// GaussianExpert

GaussianExpert::GaussianExpert(int dim,
                               std::map<Condition, GaussianParams> table)
    : dim_(dim), table_(std::move(table)) {
    if (dim < 1) throw std::invalid_argument("expert dim must be >= 1");
    if (!table_.count(Condition::null()))
        throw std::invalid_argument("expert table needs a null-condition entry");
    for (const auto& [cond, p] : table_) {
        if (p.mu.size() != static_cast<std::size_t>(dim) ||
            p.sigma.size() != static_cast<std::size_t>(dim))
            throw std::invalid_argument("entry " + cond.describe() +
                                        " has wrong dimension");
        for (double s : p.sigma)
            if (!(s > 0.0))
                throw std::invalid_argument("entry " + cond.describe() +
                                            " has non-positive sigma");
    }
}

const GaussianParams& GaussianExpert::params(const Condition& cond) const {
    auto it = table_.find(cond);
    if (it == table_.end())
        throw std::invalid_argument("unknown condition " + cond.describe());
    return it->second;
}

void GaussianExpert::epsilon(std::span<const double> z_t,
                             const Condition& cond, int t,
                             const NoiseSchedule& schedule,
                             std::span<double> out) const {
    const auto& p = params(cond);
    gaussian_marginal_epsilon(p.mu, p.sigma, schedule, t, z_t, out);
}

// --------------------------------------------------------------------------
// GmmExpert

GmmExpert::GmmExpert(int dim,
                     std::map<Condition, std::vector<GmmComponent>> table)
    : dim_(dim), table_(std::move(table)) {
    if (dim < 1) throw std::invalid_argument("expert dim must be >= 1");
    if (!table_.count(Condition::null()))
        throw std::invalid_argument("expert table needs a null-condition entry");
    for (const auto& [cond, comps] : table_) {
        if (comps.empty())
            throw std::invalid_argument("entry " + cond.describe() +
                                        " has no components");
        double wsum = 0.0;
        for (const auto& c : comps) {
            if (!(c.weight > 0.0))
                throw std::invalid_argument("component weights must be > 0");
            wsum += c.weight;
            if (c.mu.size() != static_cast<std::size_t>(dim) ||
                c.sigma.size() != static_cast<std::size_t>(dim))
                throw std::invalid_argument("entry " + cond.describe() +
                                            " has wrong dimension");
            for (double s : c.sigma)
                if (!(s > 0.0))
                    throw std::invalid_argument("component sigma must be > 0");
        }
        if (std::abs(wsum - 1.0) > 1e-12)
            throw std::invalid_argument("entry " + cond.describe() +
                                        ": component weights must sum to 1");
    }
}

const std::vector<GmmComponent>& GmmExpert::components(
    const Condition& cond) const {
    auto it = table_.find(cond);
    if (it == table_.end())
        throw std::invalid_argument("unknown condition " + cond.describe());
    return it->second;
}

void GmmExpert::epsilon(std::span<const double> z_t, const Condition& cond,
                        int t, const NoiseSchedule& schedule,
                        std::span<double> out) const {
    gmm_marginal_epsilon(components(cond), schedule, t, z_t, out);
}

// --------------------------------------------------------------------------
// MLP

std::vector<int> MlpArch::layer_dims() const {
    std::vector<int> dims;
    dims.push_back(input_dim());
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(state_dim);
    return dims;
}

std::size_t MlpArch::param_count() const {
    const auto dims = layer_dims();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        n += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    n += (labels.size() + 1) * static_cast<std::size_t>(cond_embed_dim);
    return n;
}

void MlpArch::validate() const {
    if (state_dim < 1) throw std::invalid_argument("mlp: state_dim >= 1");
    if (t_embed_dim < 2 || t_embed_dim % 2 != 0)
        throw std::invalid_argument("mlp: t_embed_dim must be even and >= 2");
    if (cond_embed_dim < 0) throw std::invalid_argument("mlp: cond_embed_dim");
    for (int h : hidden_dims)
        if (h < 1) throw std::invalid_argument("mlp: hidden dims >= 1");
    if (!std::is_sorted(labels.begin(), labels.end()) ||
        std::adjacent_find(labels.begin(), labels.end()) != labels.end())
        throw std::invalid_argument("mlp: labels must be sorted and unique");
    for (int id : labels)
        if (id < 0) throw std::invalid_argument("mlp: label ids >= 0");
}

std::size_t mlp_weight_offset(const MlpArch& arch, int layer) {
    const auto dims = arch.layer_dims();
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l)
        off += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    return off;
}

std::size_t mlp_bias_offset(const MlpArch& arch, int layer) {
    const auto dims = arch.layer_dims();
    return mlp_weight_offset(arch, layer) +
           static_cast<std::size_t>(dims[layer + 1]) * dims[layer];
}

std::size_t mlp_label_row_offset(const MlpArch& arch, int label) {
    const auto it =
        std::lower_bound(arch.labels.begin(), arch.labels.end(), label);
    if (it == arch.labels.end() || *it != label)
        throw std::invalid_argument("unknown label " + std::to_string(label));
    const auto dims = arch.layer_dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        off += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    return off + static_cast<std::size_t>(it - arch.labels.begin()) *
                     arch.cond_embed_dim;
}

std::size_t mlp_null_row_offset(const MlpArch& arch) {
    const auto dims = arch.layer_dims();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        off += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    return off + arch.labels.size() * static_cast<std::size_t>(arch.cond_embed_dim);
}

void sinusoidal_time_embedding(double t_over_T, int dim, std::span<double> out) {
    check_dim(out.size(), static_cast<std::size_t>(dim),
              "sinusoidal_time_embedding");
    const int half = dim / 2;
    for (int k = 0; k < half; ++k) {
        const double expo =
            half > 1 ? static_cast<double>(k) / (half - 1) : 0.0;
        const double freq = std::pow(10000.0, expo);
        out[static_cast<std::size_t>(2 * k)] = std::sin(t_over_T * freq);
        out[static_cast<std::size_t>(2 * k + 1)] = std::cos(t_over_T * freq);
    }
}

void mlp_build_input(const MlpArch& arch, std::span<const double> params,
                     std::span<const double> z_t, const Condition& cond, int t,
                     const NoiseSchedule& schedule, std::span<double> out) {
    if (t < 1 || t > schedule.steps())
        throw std::invalid_argument("mlp: timestep outside 1..T");
    check_dim(z_t.size(), static_cast<std::size_t>(arch.state_dim),
              "mlp input state");
    check_dim(out.size(), static_cast<std::size_t>(arch.input_dim()),
              "mlp input");
    std::copy(z_t.begin(), z_t.end(), out.begin());
    sinusoidal_time_embedding(
        static_cast<double>(t) / schedule.steps(), arch.t_embed_dim,
        out.subspan(static_cast<std::size_t>(arch.state_dim),
                    static_cast<std::size_t>(arch.t_embed_dim)));
    auto cond_part =
        out.subspan(static_cast<std::size_t>(arch.state_dim + arch.t_embed_dim),
                    static_cast<std::size_t>(arch.cond_embed_dim));
    switch (cond.kind()) {
        case Condition::Kind::null_cond: {
            const double* row = params.data() + mlp_null_row_offset(arch);
            std::copy(row, row + arch.cond_embed_dim, cond_part.begin());
            break;
        }
        case Condition::Kind::label: {
            const double* row =
                params.data() + mlp_label_row_offset(arch, cond.label_id());
            std::copy(row, row + arch.cond_embed_dim, cond_part.begin());
            break;
        }
        case Condition::Kind::embedding: {
            const auto& v = cond.embedding_values();
            check_dim(v.size(), cond_part.size(), "mlp embedding condition");
            std::copy(v.begin(), v.end(), cond_part.begin());
            break;
        }
    }
}

void mlp_forward(const MlpArch& arch, std::span<const double> params,
                 std::span<const double> input, std::span<double> out,
                 std::vector<double>* activations) {
    const auto dims = arch.layer_dims();
    check_dim(input.size(), static_cast<std::size_t>(dims.front()),
              "mlp_forward input");
    check_dim(out.size(), static_cast<std::size_t>(dims.back()),
              "mlp_forward output");

    if (activations) {
        activations->clear();
        activations->insert(activations->end(), input.begin(), input.end());
    }

    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> next;
    const int layers = static_cast<int>(dims.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        const int in_dim = dims[l];
        const int out_dim = dims[l + 1];
        const double* W = params.data() + mlp_weight_offset(arch, l);
        const double* b = params.data() + mlp_bias_offset(arch, l);
        next.assign(static_cast<std::size_t>(out_dim), 0.0);
        for (int r = 0; r < out_dim; ++r) {
            double acc = b[r];
            const double* row = W + static_cast<std::size_t>(r) * in_dim;
            for (int c = 0; c < in_dim; ++c) acc += row[c] * cur[c];
            next[static_cast<std::size_t>(r)] =
                l + 1 < layers ? std::tanh(acc) : acc;
        }
        cur.swap(next);
        if (activations)
            activations->insert(activations->end(), cur.begin(), cur.end());
    }
    std::copy(cur.begin(), cur.end(), out.begin());
}

MlpExpert::MlpExpert(MlpArch arch, std::vector<double> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
    arch_.validate();
    if (params_.size() != arch_.param_count())
        throw std::invalid_argument("mlp parameter vector has wrong size");
}

void MlpExpert::epsilon(std::span<const double> z_t, const Condition& cond,
                        int t, const NoiseSchedule& schedule,
                        std::span<double> out) const {
    std::vector<double> input(static_cast<std::size_t>(arch_.input_dim()));
    mlp_build_input(arch_, params_, z_t, cond, t, schedule, input);
    mlp_forward(arch_, params_, input, out);
}

}  // namespace unite
