#include "unite/run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "unite/model_io.hpp"

namespace unite {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (key == k) {
                ok = true;
                break;
            }
        if (!ok) fail(where, "unknown key \"" + key + "\"");
    }
}

const json& require(const json& obj, const std::string& where,
                    const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing key \"") + key + "\"");
    return *it;
}

double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& where) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    return v.get<int>();
}

std::vector<double> as_vector(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(as_number(e, where));
    return out;
}

std::shared_ptr<const NoiseSchedule> parse_schedule(const json& v,
                                                    const std::string& where) {
    if (!v.is_object()) fail(where, "expected an object");
    check_keys(v, where, {"kind", "steps", "beta_start", "beta_end", "offset"});
    const std::string kind = require(v, where, "kind").get<std::string>();
    const int steps = as_int(require(v, where, "steps"), where + ".steps");
    try {
        if (kind == "linear") {
            const double b0 =
                as_number(require(v, where, "beta_start"), where + ".beta_start");
            const double b1 =
                as_number(require(v, where, "beta_end"), where + ".beta_end");
            return std::make_shared<NoiseSchedule>(
                make_linear_schedule(steps, b0, b1));
        }
        if (kind == "cosine") {
            const double offset =
                v.contains("offset")
                    ? as_number(v["offset"], where + ".offset")
                    : 0.008;
            return std::make_shared<NoiseSchedule>(
                make_cosine_schedule(steps, offset));
        }
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    fail(where, "kind must be \"linear\" or \"cosine\"");
}

Condition parse_condition(const json& v, const std::string& where) {
    if (v.is_string()) {
        if (v.get<std::string>() == "null") return Condition::null();
        fail(where, "condition string must be \"null\"");
    }
    if (!v.is_object()) fail(where, "condition must be \"null\" or an object");
    check_keys(v, where, {"label", "embedding"});
    try {
        if (v.contains("label"))
            return Condition::label(as_int(v["label"], where + ".label"));
        if (v.contains("embedding"))
            return Condition::embedding(as_vector(v["embedding"], where));
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    fail(where, "condition needs \"label\" or \"embedding\"");
}

GaussianParams parse_gaussian_params(const json& v, const std::string& where) {
    GaussianParams p;
    p.mu = as_vector(require(v, where, "mu"), where + ".mu");
    p.sigma = as_vector(require(v, where, "sigma"), where + ".sigma");
    return p;
}

// the bundle condition must be answerable by the expert it belongs to
void check_condition_known(const ExpertDecl& decl, const std::string& where) {
    const Condition& c = decl.condition;
    switch (decl.type) {
        case ExpertDecl::Type::gaussian:
            if (!decl.gaussian_table.count(c))
                fail(where, "condition " + c.describe() +
                                " has no entry in this expert");
            return;
        case ExpertDecl::Type::gmm:
            if (!decl.gmm_table.count(c))
                fail(where, "condition " + c.describe() +
                                " has no entry in this expert");
            return;
        case ExpertDecl::Type::mlp: {
            const auto& arch =
                static_cast<const MlpExpert&>(*decl.built).arch();
            if (c.kind() == Condition::Kind::label) {
                const auto& ls = arch.labels;
                if (!std::binary_search(ls.begin(), ls.end(), c.label_id()))
                    fail(where, "model has no embedding row for " +
                                    c.describe());
            } else if (c.kind() == Condition::Kind::embedding &&
                       static_cast<int>(c.embedding_values().size()) !=
                           arch.cond_embed_dim) {
                fail(where, "embedding condition has the wrong dimension");
            }
            return;
        }
    }
}

ExpertDecl parse_expert(const json& v, const std::string& where,
                        const std::string& base_dir) {
    if (!v.is_object()) fail(where, "expected an object");
    const std::string type = require(v, where, "type").get<std::string>();
    ExpertDecl decl;
    decl.condition = parse_condition(require(v, where, "condition"),
                                     where + ".condition");
    if (v.contains("schedule"))
        decl.schedule = parse_schedule(v["schedule"], where + ".schedule");

    try {
        if (type == "gaussian") {
            check_keys(v, where, {"type", "condition", "schedule", "entries"});
            decl.type = ExpertDecl::Type::gaussian;
            const json& entries = require(v, where, "entries");
            if (!entries.is_array() || entries.empty())
                fail(where, "entries must be a non-empty array");
            int dim = -1;
            for (const auto& e : entries) {
                const std::string ew = where + ".entries";
                check_keys(e, ew, {"condition", "mu", "sigma"});
                Condition c = parse_condition(require(e, ew, "condition"), ew);
                GaussianParams p = parse_gaussian_params(e, ew);
                if (dim < 0) dim = static_cast<int>(p.mu.size());
                decl.gaussian_table.emplace(std::move(c), std::move(p));
            }
            decl.built = std::make_shared<GaussianExpert>(
                dim, decl.gaussian_table);
            check_condition_known(decl, where);
            return decl;
        }
        if (type == "gmm") {
            check_keys(v, where, {"type", "condition", "schedule", "entries"});
            decl.type = ExpertDecl::Type::gmm;
            const json& entries = require(v, where, "entries");
            if (!entries.is_array() || entries.empty())
                fail(where, "entries must be a non-empty array");
            int dim = -1;
            for (const auto& e : entries) {
                const std::string ew = where + ".entries";
                check_keys(e, ew, {"condition", "components"});
                Condition c = parse_condition(require(e, ew, "condition"), ew);
                const json& comps = require(e, ew, "components");
                if (!comps.is_array() || comps.empty())
                    fail(ew, "components must be a non-empty array");
                std::vector<GmmComponent> parsed;
                for (const auto& comp : comps) {
                    check_keys(comp, ew, {"weight", "mu", "sigma"});
                    GmmComponent g;
                    g.weight = as_number(require(comp, ew, "weight"),
                                         ew + ".weight");
                    g.mu = as_vector(require(comp, ew, "mu"), ew + ".mu");
                    g.sigma = as_vector(require(comp, ew, "sigma"), ew + ".sigma");
                    parsed.push_back(std::move(g));
                }
                if (dim < 0) dim = static_cast<int>(parsed.front().mu.size());
                decl.gmm_table.emplace(std::move(c), std::move(parsed));
            }
            decl.built = std::make_shared<GmmExpert>(dim, decl.gmm_table);
            check_condition_known(decl, where);
            return decl;
        }
        if (type == "mlp") {
            check_keys(v, where, {"type", "condition", "schedule", "path"});
            decl.type = ExpertDecl::Type::mlp;
            std::string path = require(v, where, "path").get<std::string>();
            if (!path.empty() && path.front() != '/' && !base_dir.empty())
                path = base_dir + "/" + path;
            decl.mlp_path = path;
            if (!std::filesystem::exists(path))
                fail(where, "model file does not exist: " + path);
            try {
                decl.built = std::make_shared<MlpExpert>(load_model(path));
            } catch (const std::runtime_error& e) {
                fail(where, e.what());
            }
            check_condition_known(decl, where);
            return decl;
        }
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    fail(where, "type must be \"gaussian\", \"gmm\" or \"mlp\"");
}

GridSpec parse_grid(const json& v, const std::string& where) {
    check_keys(v, where, {"lo", "hi", "bins"});
    const auto lo = as_vector(require(v, where, "lo"), where + ".lo");
    const auto hi = as_vector(require(v, where, "hi"), where + ".hi");
    const json& jb = require(v, where, "bins");
    if (!jb.is_array() || jb.size() != lo.size() || hi.size() != lo.size())
        fail(where, "lo, hi and bins must be arrays of equal length");
    if (lo.size() > 2) fail(where, "grid supports at most 2 dimensions");
    GridSpec g;
    g.dims = static_cast<int>(lo.size());
    for (std::size_t a = 0; a < lo.size(); ++a) {
        g.lo[a] = lo[a];
        g.hi[a] = hi[a];
        g.bins[a] = as_int(jb[a], where + ".bins");
    }
    try {
        g.validate(1);
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    return g;
}

DatasetSpec parse_dataset(const json& v, const std::string& where) {
    check_keys(v, where,
               {"generator", "blobs", "noise", "extent", "count", "seed"});
    DatasetSpec spec;
    const std::string gen = require(v, where, "generator").get<std::string>();
    if (gen == "gaussian_blobs") {
        spec.kind = DatasetKind::gaussian_blobs;
        const json& blobs = require(v, where, "blobs");
        if (!blobs.is_array() || blobs.empty())
            fail(where, "blobs must be a non-empty array");
        for (const auto& b : blobs) {
            check_keys(b, where + ".blobs", {"label", "mu", "sigma"});
            BlobSpec bs;
            bs.label = as_int(require(b, where, "label"), where + ".label");
            const auto mu = as_vector(require(b, where, "mu"), where + ".mu");
            if (mu.size() != 2) fail(where, "blob mu must have 2 entries");
            bs.mu = {mu[0], mu[1]};
            bs.sigma = as_number(require(b, where, "sigma"), where + ".sigma");
            spec.blobs.push_back(bs);
        }
    } else if (gen == "two_moons") {
        spec.kind = DatasetKind::two_moons;
        if (v.contains("noise"))
            spec.moons_noise = as_number(v["noise"], where + ".noise");
    } else if (gen == "checkerboard") {
        spec.kind = DatasetKind::checkerboard;
        if (v.contains("extent"))
            spec.checker_extent = as_number(v["extent"], where + ".extent");
    } else {
        fail(where, "unknown generator \"" + gen + "\"");
    }
    spec.count = static_cast<std::size_t>(
        as_int(require(v, where, "count"), where + ".count"));
    if (v.contains("seed"))
        spec.seed = static_cast<std::uint64_t>(
            require(v, where, "seed").get<std::int64_t>());
    return spec;
}

}  // namespace

DiagMixture ExpertDecl::conditional_mixture() const {
    DiagMixture m;
    if (type == Type::gaussian) {
        const auto& p = gaussian_table.at(condition);
        m.dim = static_cast<int>(p.mu.size());
        m.components.push_back({1.0, p.mu, p.sigma});
    } else if (type == Type::gmm) {
        const auto& comps = gmm_table.at(condition);
        m.dim = static_cast<int>(comps.front().mu.size());
        m.components = comps;
    } else {
        throw std::logic_error("no analytic form for a trained expert");
    }
    return m;
}

DiagMixture ExpertDecl::unconditional_mixture() const {
    DiagMixture m;
    if (type == Type::gaussian) {
        const auto& p = gaussian_table.at(Condition::null());
        m.dim = static_cast<int>(p.mu.size());
        m.components.push_back({1.0, p.mu, p.sigma});
    } else if (type == Type::gmm) {
        const auto& comps = gmm_table.at(Condition::null());
        m.dim = static_cast<int>(comps.front().mu.size());
        m.components = comps;
    } else {
        throw std::logic_error("no analytic form for a trained expert");
    }
    return m;
}

ExpertBundle RunConfig::build_bundle() const {
    std::vector<BundleEntry> entries;
    entries.reserve(experts.size());
    for (const auto& decl : experts)
        entries.push_back({decl.built, decl.condition, decl.schedule});
    return ExpertBundle(master, std::move(entries));
}

bool RunConfig::all_analytic() const {
    for (const auto& e : experts)
        if (!e.analytic()) return false;
    return true;
}

namespace {

RunConfig parse_run_config_impl(const std::string& json_text,
                                const std::string& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    check_keys(root, "config",
               {"schedule", "experts", "composition", "sampler", "chains",
                "grid", "output_dir", "train"});

    RunConfig cfg;
    cfg.master = parse_schedule(require(root, "config", "schedule"),
                                "config.schedule");

    const json& experts = require(root, "config", "experts");
    if (!experts.is_array() || experts.empty())
        throw ConfigError("config.experts must be a non-empty array");
    for (std::size_t i = 0; i < experts.size(); ++i)
        cfg.experts.push_back(parse_expert(
            experts[i], "config.experts[" + std::to_string(i) + "]", base_dir));

    {
        const json& comp = require(root, "config", "composition");
        check_keys(comp, "config.composition", {"a", "w", "allow_w_below_one"});
        cfg.composition.a =
            as_vector(require(comp, "config.composition", "a"),
                      "config.composition.a");
        cfg.composition.w =
            as_vector(require(comp, "config.composition", "w"),
                      "config.composition.w");
        if (comp.contains("allow_w_below_one"))
            cfg.composition.allow_w_below_one =
                comp["allow_w_below_one"].get<bool>();
        try {
            cfg.composition.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config.composition: ") + e.what());
        }
        if (cfg.composition.experts() !=
            static_cast<int>(cfg.experts.size()))
            throw ConfigError(
                "config.composition: a and w need one entry per expert");
    }

    if (root.contains("sampler")) {
        const json& s = root["sampler"];
        check_keys(s, "config.sampler",
                   {"kind", "steps", "seed", "sigma_convention",
                    "record_trajectory"});
        const std::string kind =
            require(s, "config.sampler", "kind").get<std::string>();
        if (kind == "ancestral")
            cfg.sampler.kind = SamplerKind::ancestral;
        else if (kind == "ddim")
            cfg.sampler.kind = SamplerKind::ddim;
        else
            throw ConfigError(
                "config.sampler.kind must be \"ancestral\" or \"ddim\"");
        if (s.contains("steps"))
            cfg.sampler.num_steps = as_int(s["steps"], "config.sampler.steps");
        if (s.contains("seed"))
            cfg.sampler.seed =
                static_cast<std::uint64_t>(s["seed"].get<std::int64_t>());
        if (s.contains("sigma_convention")) {
            const std::string c = s["sigma_convention"].get<std::string>();
            if (c == "sigma")
                cfg.sampler.sigma_convention = SigmaConvention::sigma;
            else if (c == "sigma_squared")
                cfg.sampler.sigma_convention = SigmaConvention::sigma_squared;
            else
                throw ConfigError(
                    "config.sampler.sigma_convention must be \"sigma\" or "
                    "\"sigma_squared\"");
        }
        if (s.contains("record_trajectory"))
            cfg.sampler.record_trajectory = s["record_trajectory"].get<bool>();
    }

    if (root.contains("chains")) {
        const int m = as_int(root["chains"], "config.chains");
        if (m < 1) throw ConfigError("config.chains must be >= 1");
        cfg.chains = static_cast<std::size_t>(m);
    }

    const int dim = cfg.experts.front().built->dim();
    if (root.contains("grid")) {
        cfg.grid = parse_grid(root["grid"], "config.grid");
        if (cfg.grid.dims != dim)
            throw ConfigError("config.grid dimension does not match experts");
    } else {
        cfg.grid.dims = dim;
        for (int a = 0; a < dim; ++a) {
            cfg.grid.lo[static_cast<std::size_t>(a)] = -6.0;
            cfg.grid.hi[static_cast<std::size_t>(a)] = 6.0;
            cfg.grid.bins[static_cast<std::size_t>(a)] = 64;
        }
    }

    if (root.contains("output_dir"))
        cfg.output_dir = root["output_dir"].get<std::string>();

    if (root.contains("train")) {
        const json& tr = root["train"];
        check_keys(tr, "config.train",
                   {"dataset", "hidden", "epochs", "batch_size",
                    "learning_rate", "seed", "p_uncond"});
        cfg.train.present = true;
        cfg.train.dataset = parse_dataset(require(tr, "config.train", "dataset"),
                                          "config.train.dataset");
        const json& hidden = require(tr, "config.train", "hidden");
        if (!hidden.is_array())
            throw ConfigError("config.train.hidden must be an array");
        for (const auto& h : hidden)
            cfg.train.hidden_dims.push_back(as_int(h, "config.train.hidden"));
        if (tr.contains("epochs"))
            cfg.train.config.epochs = as_int(tr["epochs"], "config.train.epochs");
        if (tr.contains("batch_size"))
            cfg.train.config.batch_size =
                as_int(tr["batch_size"], "config.train.batch_size");
        if (tr.contains("learning_rate"))
            cfg.train.config.learning_rate =
                as_number(tr["learning_rate"], "config.train.learning_rate");
        if (tr.contains("seed"))
            cfg.train.config.seed =
                static_cast<std::uint64_t>(tr["seed"].get<std::int64_t>());
        if (tr.contains("p_uncond"))
            cfg.train.config.p_uncond =
                as_number(tr["p_uncond"], "config.train.p_uncond");
        try {
            cfg.train.config.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config.train: ") + e.what());
        }
    }

    // cross-checks that need the bundle (dimension agreement, etc.)
    try {
        cfg.build_bundle();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config.experts: ") + e.what());
    }
    return cfg;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& base_dir) {
    try {
        return parse_run_config_impl(json_text, base_dir);
    } catch (const json::exception& e) {
        // wrong JSON types surface here (string where a number belongs, ...)
        throw ConfigError(std::string("config: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string dir =
        std::filesystem::path(path).parent_path().string();
    return parse_run_config(buf.str(), dir);
}

std::string default_config_json() {
    return R"json({
  "schedule": {"kind": "linear", "steps": 1000, "beta_start": 1e-4, "beta_end": 0.02},
  "experts": [
    {
      "type": "gaussian",
      "condition": {"label": 0},
      "entries": [
        {"condition": "null", "mu": [0.0], "sigma": [1.5]},
        {"condition": {"label": 0}, "mu": [1.0], "sigma": [0.6]}
      ]
    },
    {
      "type": "gaussian",
      "condition": {"label": 1},
      "entries": [
        {"condition": "null", "mu": [0.0], "sigma": [1.5]},
        {"condition": {"label": 1}, "mu": [-1.0], "sigma": [0.8]}
      ]
    }
  ],
  "composition": {"a": [0.5, 0.5], "w": [1.0, 1.0]},
  "sampler": {"kind": "ancestral", "seed": 20240901},
  "chains": 10000,
  "grid": {"lo": [-6.0], "hi": [6.0], "bins": [64]},
  "output_dir": "out"
})json";
}

}  // namespace unite
