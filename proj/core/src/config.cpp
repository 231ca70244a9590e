#include "upe/config.hpp"

#include "upe/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace upe {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    value = trim(value);
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ValidationError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "'");
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Field {
    Setter set;
    Getter get;
    bool affects_results = true;
};

template <typename T>
Field numeric(T RunConfig::*member) {
    return Field{[member](RunConfig& c, std::string_view key, std::string_view v) {
                     c.*member = parse_number<T>(key, v);
                 },
                 [member](const RunConfig& c) {
                     if constexpr (std::is_floating_point_v<T>) {
                         return fmt_double(c.*member);
                     } else {
                         return std::to_string(c.*member);
                     }
                 }};
}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = [] {
        std::map<std::string, Field, std::less<>> t;
        t["preset"] = Field{[](RunConfig& c, std::string_view, std::string_view v) { c.preset = parse_preset(v); },
                            [](const RunConfig& c) { return std::string(to_string(c.preset)); }};
        t["K"] = numeric(&RunConfig::K);
        t["k"] = numeric(&RunConfig::k);
        t["Q"] = numeric(&RunConfig::Q);
        t["N"] = numeric(&RunConfig::N);
        t["u_minus"] = numeric(&RunConfig::u_minus);
        t["u_plus"] = numeric(&RunConfig::u_plus);
        t["N_L"] = numeric(&RunConfig::N_L);
        t["N_N"] = numeric(&RunConfig::N_N);
        t["D_p"] = numeric(&RunConfig::D_p);
        t["L_2"] = numeric(&RunConfig::L_2);
        t["lr"] = numeric(&RunConfig::lr);
        t["n"] = numeric(&RunConfig::n);
        t["B"] = numeric(&RunConfig::B);
        t["seed"] = numeric(&RunConfig::seed);
        t["C_F"] = numeric(&RunConfig::C_F);
        t["dQ"] = numeric(&RunConfig::dQ);
        t["L_short"] = numeric(&RunConfig::L_short);
        t["L_long"] = numeric(&RunConfig::L_long);
        t["data_dir"] = Field{[](RunConfig& c, std::string_view, std::string_view v) { c.data_dir = std::string(trim(v)); },
                              [](const RunConfig& c) { return c.data_dir; }, false};
        Field jobs = numeric(&RunConfig::jobs);
        jobs.affects_results = false;
        t["jobs"] = jobs;
        return t;
    }();
    return table;
}

}  // namespace

Preset parse_preset(std::string_view text) {
    text = trim(text);
    if (text == "paper") {
        return Preset::Paper;
    }
    if (text == "desk") {
        return Preset::Desk;
    }
    throw ValidationError("unknown preset '" + std::string(text) + "' (expected paper or desk)");
}

std::string_view to_string(Preset p) noexcept { return p == Preset::Paper ? "paper" : "desk"; }

RunConfig RunConfig::for_preset(Preset p) {
    RunConfig c;
    c.preset = p;
    if (p == Preset::Paper) {
        c.N_L = 5;
        c.N_N = 1024;
        c.lr = 1e-6;
        c.n = 30000;
    }
    return c;
}

void RunConfig::set(std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) {
        throw ValidationError("unknown config key '" + std::string(key) + "'");
    }
    it->second.set(*this, key, value);
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, field] : fields()) {
            out.push_back(name);
        }
        return out;
    }();
    return names;
}

StrategyConfig RunConfig::strategy_config() const {
    StrategyConfig s;
    s.N = N;
    s.Q = Q;
    s.dQ = dQ;
    s.fee = C_F;
    s.u_minus = u_minus;
    s.u_plus = u_plus;
    return s;
}

nn::TrainingConfig RunConfig::training_config() const {
    nn::TrainingConfig t;
    t.learning_rate = lr;
    t.epochs = n;
    t.dropout_p = D_p;
    t.l2_factor = L_2;
    t.batch_size = B;
    t.seed = seed;
    return t;
}

ForecastParams RunConfig::forecast_params() const {
    ForecastParams f;
    f.K = K;
    f.k = k;
    f.L_short = L_short;
    f.L_long = L_long;
    f.hidden_layers = N_L;
    f.neurons = N_N;
    f.training = training_config();
    return f;
}

void RunConfig::validate() const {
    strategy_config().validate();
    forecast_params().validate();
    if (jobs == 0) {
        throw ValidationError("jobs must be at least 1");
    }
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [name, field] : fields()) {
        if (field.affects_results) {
            out += name + "=" + field.get(*this) + "\n";
        }
    }
    return out;
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = std::string(trim(line.substr(0, eq)));
        if (fields().find(key) == fields().end()) {
            throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        out[key] = std::string(trim(line.substr(eq + 1)));
    }
    return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open config file '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

RunConfig resolve_config(const std::map<std::string, std::string>& file_entries,
                         const std::map<std::string, std::string>& overrides) {
    Preset preset = Preset::Desk;
    if (auto it = overrides.find("preset"); it != overrides.end()) {
        preset = parse_preset(it->second);
    } else if (auto jt = file_entries.find("preset"); jt != file_entries.end()) {
        preset = parse_preset(jt->second);
    }
    RunConfig c = RunConfig::for_preset(preset);
    for (const auto& [key, value] : file_entries) {
        if (key != "preset") {
            c.set(key, value);
        }
    }
    for (const auto& [key, value] : overrides) {
        if (key != "preset") {
            c.set(key, value);
        }
    }
    c.validate();
    return c;
}

}  // namespace upe
