#include "quietnet/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "quietnet/error.hpp"

namespace quietnet {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view v)
{
    const std::string s(v);
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw Error(Errc::ConfigParse, "key '" + std::string(key) + "' expects a number, got '" + s + "'");
    }
    return d;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v)
{
    Int out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw Error(Errc::ConfigParse, "key '" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
    }
    return out;
}

bool to_bool(std::string_view key, std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(Errc::ConfigParse, "key '" + std::string(key) + "' expects true or false");
}

std::vector<int> to_int_list(std::string_view key, std::string_view v)
{
    std::vector<int> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (!item.empty()) out.push_back(to_int<int>(key, item));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

std::string join(const std::vector<int>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_double(double d)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

bool has_prefix(std::string_view s, std::string_view p)
{
    return s.substr(0, p.size()) == p;
}

RegMode implied_reg_mode(TrainMode mode)
{
    switch (mode) {
    case TrainMode::reg_correlated: return RegMode::correlated;
    case TrainMode::reg_uncorrelated: return RegMode::uncorrelated;
    default: return RegMode::none;
    }
}

void set_value(RunConfig& cfg, std::string_view key, std::string_view value, bool& reg_mode_set)
{
    TrainConfig& t = cfg.train;
    if (key == "training.mode") t.mode = parse_train_mode(value);
    else if (key == "training.epochs") t.epochs = to_int<int>(key, value);
    else if (key == "training.batch_size") t.batch_size = to_int<int>(key, value);
    else if (key == "training.optimizer") t.optimizer.kind = parse_optimizer_kind(value);
    else if (key == "training.learning_rate") t.optimizer.learning_rate = to_double(key, value);
    else if (key == "training.momentum") t.optimizer.momentum = to_double(key, value);
    else if (key == "training.beta1") t.optimizer.beta1 = to_double(key, value);
    else if (key == "training.beta2") t.optimizer.beta2 = to_double(key, value);
    else if (key == "training.epsilon") t.optimizer.epsilon = to_double(key, value);
    else if (key == "training.seed") t.seed = to_int<std::uint64_t>(key, value);
    else if (key == "training.loss") t.loss = parse_loss_kind(value);
    else if (key == "training.layer_sizes") t.layer_sizes = to_int_list(key, value);
    else if (key == "training.noise_in_reg_training") t.noise_in_reg_training = to_bool(key, value);
    else if (key == "training.validation_size") cfg.validation_size = to_int<std::size_t>(key, value);
    else if (key == "noise.kind") t.noise.kind = parse_noise_kind(value);
    else if (key == "noise.variance") t.noise.variance = to_double(key, value);
    else if (key == "noise.sites") t.noise.sites = to_int_list(key, value);
    else if (key == "reg.mode") {
        t.reg.mode = parse_reg_mode(value);
        reg_mode_set = true;
    }
    else if (key == "reg.lambda_deriv") t.reg.lambda_deriv = to_double(key, value);
    else if (key == "reg.deriv_layers") t.reg.deriv_layers = to_int_list(key, value);
    else if (has_prefix(key, "reg.lambda_rowsum.")) {
        t.reg.lambda_rowsum[to_int<int>(key, key.substr(18))] = to_double(key, value);
    }
    else if (has_prefix(key, "reg.lambda_l2.")) {
        t.reg.lambda_l2[to_int<int>(key, key.substr(14))] = to_double(key, value);
    }
    else if (key == "data.train") cfg.train_data = std::string(value);
    else if (key == "data.test") cfg.test_data = std::string(value);
    else if (key == "data.val") cfg.val_data = std::string(value);
    else if (key == "output.dir") cfg.output_dir = std::string(value);
    else if (key == "output.tag") cfg.tag = std::string(value);
    else throw Error(Errc::ConfigParse, "unknown key '" + std::string(key) + "'");
}

}  // namespace

RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    bool reg_mode_set = false;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(Errc::ConfigParse, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            set_value(cfg, key, value, reg_mode_set);
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
        }
    }
    if (!reg_mode_set) {
        cfg.train.reg.mode = implied_reg_mode(cfg.train.mode);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw Error(Errc::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value)
{
    bool reg_mode_set = false;
    const TrainMode before = cfg.train.mode;
    set_value(cfg, trim(key), trim(value), reg_mode_set);
    if (!reg_mode_set && cfg.train.mode != before) {
        cfg.train.reg.mode = implied_reg_mode(cfg.train.mode);
    }
}

std::string to_config_text(const RunConfig& cfg)
{
    const TrainConfig& t = cfg.train;
    std::ostringstream os;
    os << "training.mode = " << to_string(t.mode) << "\n"
       << "training.epochs = " << t.epochs << "\n"
       << "training.batch_size = " << t.batch_size << "\n"
       << "training.optimizer = " << to_string(t.optimizer.kind) << "\n"
       << "training.learning_rate = " << fmt_double(t.optimizer.learning_rate) << "\n"
       << "training.momentum = " << fmt_double(t.optimizer.momentum) << "\n"
       << "training.beta1 = " << fmt_double(t.optimizer.beta1) << "\n"
       << "training.beta2 = " << fmt_double(t.optimizer.beta2) << "\n"
       << "training.epsilon = " << fmt_double(t.optimizer.epsilon) << "\n"
       << "training.seed = " << t.seed << "\n"
       << "training.loss = " << to_string(t.loss) << "\n"
       << "training.layer_sizes = " << join(t.layer_sizes) << "\n"
       << "training.noise_in_reg_training = " << (t.noise_in_reg_training ? "true" : "false") << "\n"
       << "training.validation_size = " << cfg.validation_size << "\n"
       << "noise.kind = " << to_string(t.noise.kind) << "\n"
       << "noise.variance = " << fmt_double(t.noise.variance) << "\n"
       << "noise.sites = " << join(t.noise.sites) << "\n"
       << "reg.mode = " << to_string(t.reg.mode) << "\n";
    for (const auto& [l, v] : t.reg.lambda_rowsum) os << "reg.lambda_rowsum." << l << " = " << fmt_double(v) << "\n";
    os << "reg.lambda_deriv = " << fmt_double(t.reg.lambda_deriv) << "\n";
    for (const auto& [l, v] : t.reg.lambda_l2) os << "reg.lambda_l2." << l << " = " << fmt_double(v) << "\n";
    os << "reg.deriv_layers = " << join(t.reg.deriv_layers) << "\n"
       << "data.train = " << cfg.train_data << "\n"
       << "data.test = " << cfg.test_data << "\n"
       << "data.val = " << cfg.val_data << "\n"
       << "output.dir = " << cfg.output_dir << "\n"
       << "output.tag = " << cfg.tag << "\n";
    return os.str();
}

std::filesystem::path data_directory()
{
    if (const char* env = std::getenv("QUIETNET_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return ".";
}

std::filesystem::path resolve_data_path(const std::string& path)
{
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    return data_directory() / p;
}

}  // namespace quietnet
