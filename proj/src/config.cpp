#include "fedlab/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedlab/csv.hpp"

namespace fedlab::expcli {

namespace {

Vector default_base_param(int m) {
    Vector v(m);
    for (int k = 0; k < m; ++k) v[k] = 0.4 * ((k % 2 == 0) ? 1.0 : -1.0);
    return v;
}

Matrix default_heterogeneity(int m, int d_z) {
    Matrix g(m, d_z);
    for (int k = 0; k < m; ++k)
        for (int j = 0; j < d_z; ++j)
            g(k, j) = 0.5 * (((k + j) % 2 == 0) ? 1.0 : -1.0);
    return g;
}

Vector alternating(int d, double scale) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = scale * ((j % 2 == 0) ? 1.0 : -1.0);
    return v;
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.population.num_clients = 400;
    cfg.population.covariate_dim = 2;
    cfg.population.feature_dim = 5;
    cfg.population.samples_per_client = 200;
    cfg.population.ridge = 1e-2;
    cfg.population.base_param = default_base_param(5);
    cfg.population.heterogeneity = default_heterogeneity(5, 2);

    cfg.selection.enroll_intercept = -0.2;
    cfg.selection.enroll_coef = alternating(2, 1.2);
    cfg.selection.bias_scale = 1.0;
    cfg.selection.part_intercept = -0.4;
    cfg.selection.part_coef_z = alternating(2, 0.3);
    cfg.selection.part_coef_x = Vector::Constant(2, 0.8);
    cfg.selection.preround_dim = 2;
    cfg.selection.rho_mix = 0.0;

    cfg.training.local_steps = 5;
    cfg.training.local_step = 0.1;
    cfg.training.server_step = 1.0;
    cfg.training.rounds = 300;
    cfg.training.batch_size = 0;

    cfg.method_config.fit.ridge = 1e-6;
    cfg.method_config.fit.clip_floor = 0.05;
    cfg.method_config.refit_window = 50;
    cfg.method_config.balance.covariate_dim = 2;
    cfg.method_config.balance.indicator_bins = 0;
    cfg.method_config.moment_noise_sigma = 0.0;
    cfg.method_config.hajek_normalize = false;

    cfg.methods = {federation::Method::Naive, federation::Method::RoundOnlyIpw,
                   federation::Method::FedIpw, federation::Method::OracleIpw};
    cfg.replications = 10;
    cfg.master_seed = 42;
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s, int line_no) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(line_no) + ": bad number '" + item + "'");
        }
    }
    if (out.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty list");
    return out;
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

Matrix parse_matrix(const std::string& s, int line_no) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(s);
    std::string row;
    while (std::getline(ss, row, ';')) {
        row = trim(row);
        if (row.empty()) continue;
        rows.push_back(parse_list(row, line_no));
    }
    if (rows.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty matrix");
    Matrix out(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw ConfigError("line " + std::to_string(line_no) + ": ragged matrix rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return out;
}

double parse_double(const std::string& s, int line_no) {
    auto v = parse_list(s, line_no);
    if (v.size() != 1)
        throw ConfigError("line " + std::to_string(line_no) + ": expected a single number");
    return v.front();
}

int parse_int(const std::string& s, int line_no) {
    const double d = parse_double(s, line_no);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw ConfigError("line " + std::to_string(line_no) + ": expected an integer");
    return i;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg = default_config();
    bool base_param_set = false;
    bool heterogeneity_set = false;
    bool enroll_coef_set = false;
    bool part_coef_z_set = false;
    bool part_coef_x_set = false;

    using Setter = std::function<void(const std::string&, int)>;
    const std::map<std::string, Setter> setters = {
        {"population.num_clients", [&](const std::string& v, int l) { cfg.population.num_clients = parse_int(v, l); }},
        {"population.covariate_dim", [&](const std::string& v, int l) { cfg.population.covariate_dim = parse_int(v, l); }},
        {"population.feature_dim", [&](const std::string& v, int l) { cfg.population.feature_dim = parse_int(v, l); }},
        {"population.samples_per_client", [&](const std::string& v, int l) { cfg.population.samples_per_client = parse_int(v, l); }},
        {"population.ridge", [&](const std::string& v, int l) { cfg.population.ridge = parse_double(v, l); }},
        {"population.base_param", [&](const std::string& v, int l) { cfg.population.base_param = to_vector(parse_list(v, l)); base_param_set = true; }},
        {"population.heterogeneity", [&](const std::string& v, int l) { cfg.population.heterogeneity = parse_matrix(v, l); heterogeneity_set = true; }},
        {"selection.enroll_intercept", [&](const std::string& v, int l) { cfg.selection.enroll_intercept = parse_double(v, l); }},
        {"selection.enroll_coef", [&](const std::string& v, int l) { cfg.selection.enroll_coef = to_vector(parse_list(v, l)); enroll_coef_set = true; }},
        {"selection.bias_scale", [&](const std::string& v, int l) { cfg.selection.bias_scale = parse_double(v, l); }},
        {"selection.part_intercept", [&](const std::string& v, int l) { cfg.selection.part_intercept = parse_double(v, l); }},
        {"selection.part_coef_z", [&](const std::string& v, int l) { cfg.selection.part_coef_z = to_vector(parse_list(v, l)); part_coef_z_set = true; }},
        {"selection.part_coef_x", [&](const std::string& v, int l) { cfg.selection.part_coef_x = to_vector(parse_list(v, l)); part_coef_x_set = true; }},
        {"selection.preround_dim", [&](const std::string& v, int l) { cfg.selection.preround_dim = parse_int(v, l); }},
        {"selection.rho_mix", [&](const std::string& v, int l) { cfg.selection.rho_mix = parse_double(v, l); }},
        {"training.local_steps", [&](const std::string& v, int l) { cfg.training.local_steps = parse_int(v, l); }},
        {"training.local_step", [&](const std::string& v, int l) { cfg.training.local_step = parse_double(v, l); }},
        {"training.server_step", [&](const std::string& v, int l) { cfg.training.server_step = parse_double(v, l); }},
        {"training.rounds", [&](const std::string& v, int l) { cfg.training.rounds = parse_int(v, l); }},
        {"training.batch_size", [&](const std::string& v, int l) { cfg.training.batch_size = parse_int(v, l); }},
        {"training.methods", [&](const std::string& v, int l) {
             cfg.methods.clear();
             std::stringstream ss(v);
             std::string item;
             while (std::getline(ss, item, ',')) {
                 item = trim(item);
                 if (item.empty()) continue;
                 try {
                     cfg.methods.push_back(federation::method_from_name(item));
                 } catch (const ConfigError&) {
                     throw ConfigError("line " + std::to_string(l) + ": unknown method '" + item + "'");
                 }
             }
             if (cfg.methods.empty())
                 throw ConfigError("line " + std::to_string(l) + ": empty method list");
         }},
        {"propensity.ridge", [&](const std::string& v, int l) { cfg.method_config.fit.ridge = parse_double(v, l); }},
        {"propensity.clip_floor", [&](const std::string& v, int l) { cfg.method_config.fit.clip_floor = parse_double(v, l); }},
        {"propensity.refit_window", [&](const std::string& v, int l) { cfg.method_config.refit_window = parse_int(v, l); }},
        {"propensity.estimate_population_size", [&](const std::string& v, int l) { cfg.method_config.estimate_population_size = parse_int(v, l) != 0; }},
        {"calibration.indicator_bins", [&](const std::string& v, int l) { cfg.method_config.balance.indicator_bins = parse_int(v, l); }},
        {"calibration.moment_noise_sigma", [&](const std::string& v, int l) { cfg.method_config.moment_noise_sigma = parse_double(v, l); }},
        {"calibration.hajek_normalize", [&](const std::string& v, int l) { cfg.method_config.hajek_normalize = parse_int(v, l) != 0; }},
        {"experiment.replications", [&](const std::string& v, int l) { cfg.replications = parse_int(v, l); }},
        {"experiment.master_seed", [&](const std::string& v, int l) { cfg.master_seed = static_cast<std::uint64_t>(parse_double(v, l)); }},
        {"experiment.sweep_param", [&](const std::string& v, int) { cfg.sweep_param = trim(v); }},
        {"experiment.sweep_values", [&](const std::string& v, int l) { cfg.sweep_values = parse_list(v, l); }},
    };

    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;
        const auto it = setters.find(full);
        if (it == setters.end())
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + full + "'");
        it->second(value, line_no);
    }

    // Dimension-dependent defaults track any dimension overrides.
    if (!base_param_set) cfg.population.base_param = default_base_param(cfg.population.feature_dim);
    if (!heterogeneity_set)
        cfg.population.heterogeneity =
            default_heterogeneity(cfg.population.feature_dim, cfg.population.covariate_dim);
    if (!enroll_coef_set) cfg.selection.enroll_coef = alternating(cfg.population.covariate_dim, 1.2);
    if (!part_coef_z_set) cfg.selection.part_coef_z = alternating(cfg.population.covariate_dim, 0.3);
    if (!part_coef_x_set) cfg.selection.part_coef_x = Vector::Constant(cfg.selection.preround_dim, 0.8);
    cfg.method_config.balance.covariate_dim = cfg.population.covariate_dim;
    cfg.population.master_seed = cfg.master_seed;
    if (cfg.selection.rho_mix != 0.0 &&
        (cfg.selection.mix_matrix.rows() != cfg.selection.preround_dim ||
         cfg.selection.mix_matrix.cols() != cfg.population.covariate_dim))
        cfg.selection.mix_matrix =
            default_heterogeneity(cfg.selection.preround_dim, cfg.population.covariate_dim);

    if (cfg.replications < 1) throw ConfigError("replications must be >= 1");
    cfg.population.validate();
    cfg.selection.validate(cfg.population.covariate_dim);
    cfg.training.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

std::string join(const Vector& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += csv::format_double(v[i]);
    }
    return out;
}

std::string join(const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i) out += "; ";
        out += join(Vector(m.row(i).transpose()));
    }
    return out;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[population]\n";
    out << "num_clients = " << cfg.population.num_clients << "\n";
    out << "covariate_dim = " << cfg.population.covariate_dim << "\n";
    out << "feature_dim = " << cfg.population.feature_dim << "\n";
    out << "samples_per_client = " << cfg.population.samples_per_client << "\n";
    out << "ridge = " << csv::format_double(cfg.population.ridge) << "\n";
    out << "base_param = " << join(cfg.population.base_param) << "\n";
    out << "heterogeneity = " << join(cfg.population.heterogeneity) << "\n";
    out << "[selection]\n";
    out << "enroll_intercept = " << csv::format_double(cfg.selection.enroll_intercept) << "\n";
    out << "enroll_coef = " << join(cfg.selection.enroll_coef) << "\n";
    out << "bias_scale = " << csv::format_double(cfg.selection.bias_scale) << "\n";
    out << "part_intercept = " << csv::format_double(cfg.selection.part_intercept) << "\n";
    out << "part_coef_z = " << join(cfg.selection.part_coef_z) << "\n";
    out << "part_coef_x = " << join(cfg.selection.part_coef_x) << "\n";
    out << "preround_dim = " << cfg.selection.preround_dim << "\n";
    out << "rho_mix = " << csv::format_double(cfg.selection.rho_mix) << "\n";
    out << "[training]\n";
    out << "local_steps = " << cfg.training.local_steps << "\n";
    out << "local_step = " << csv::format_double(cfg.training.local_step) << "\n";
    out << "server_step = " << csv::format_double(cfg.training.server_step) << "\n";
    out << "rounds = " << cfg.training.rounds << "\n";
    out << "batch_size = " << cfg.training.batch_size << "\n";
    out << "methods = ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
        if (i) out << ",";
        out << federation::method_name(cfg.methods[i]);
    }
    out << "\n";
    out << "[propensity]\n";
    out << "ridge = " << csv::format_double(cfg.method_config.fit.ridge) << "\n";
    out << "clip_floor = " << csv::format_double(cfg.method_config.fit.clip_floor) << "\n";
    out << "refit_window = " << cfg.method_config.refit_window << "\n";
    out << "estimate_population_size = " << (cfg.method_config.estimate_population_size ? 1 : 0)
        << "\n";
    out << "[calibration]\n";
    out << "indicator_bins = " << cfg.method_config.balance.indicator_bins << "\n";
    out << "moment_noise_sigma = " << csv::format_double(cfg.method_config.moment_noise_sigma)
        << "\n";
    out << "hajek_normalize = " << (cfg.method_config.hajek_normalize ? 1 : 0) << "\n";
    out << "[experiment]\n";
    out << "replications = " << cfg.replications << "\n";
    out << "master_seed = " << cfg.master_seed << "\n";
    if (!cfg.sweep_param.empty()) {
        out << "sweep_param = " << cfg.sweep_param << "\n";
        out << "sweep_values = " << join(to_vector(cfg.sweep_values)) << "\n";
    }
    return out.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& name, double value) {
    if (name == "bias_scale") cfg.selection.bias_scale = value;
    else if (name == "moment_noise_sigma") cfg.method_config.moment_noise_sigma = value;
    else if (name == "clip_floor") cfg.method_config.fit.clip_floor = value;
    else if (name == "rounds") cfg.training.rounds = static_cast<int>(value);
    else if (name == "local_step") cfg.training.local_step = value;
    else if (name == "local_steps") cfg.training.local_steps = static_cast<int>(value);
    else if (name == "server_step") cfg.training.server_step = value;
    else if (name == "batch_size") cfg.training.batch_size = static_cast<int>(value);
    else if (name == "replications") cfg.replications = static_cast<int>(value);
    else if (name == "num_clients") cfg.population.num_clients = static_cast<int>(value);
    else if (name == "enroll_intercept") cfg.selection.enroll_intercept = value;
    else if (name == "part_intercept") cfg.selection.part_intercept = value;
    else if (name == "rho_mix") cfg.selection.rho_mix = value;
    else if (name == "refit_window") cfg.method_config.refit_window = static_cast<int>(value);
    else throw ConfigError("unknown sweep parameter '" + name + "'");
}

}  // namespace fedlab::expcli
