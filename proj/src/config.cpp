#include "gvt/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gvt {

namespace {

// the full schema: section -> allowed keys
const std::map<std::string, std::vector<std::string>>& schema() {
    static const std::map<std::string, std::vector<std::string>> s = {
        {"data", {"alphabet", "max_atoms"}},
        {"vqvae",
         {"l_enc", "l_dec", "d", "heads", "k_c", "d_c", "lambda_node", "lambda_edge", "beta",
          "k_pe", "ff_mult", "use_rope", "rope_base", "ordering"}},
        {"ar", {"layers", "d", "heads", "max_len", "ff_mult"}},
        {"train",
         {"epochs", "batch_size", "lr", "weight_decay", "grad_clip", "seed", "val_size"}},
        {"sample", {"count", "temperature", "top_k", "max_len"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig RunConfig::parse_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (schema().find(section) == schema().end())
                throw ConfigError("unknown section [" + section + "]", line_no);
            cfg.sections_[section]; // mark present even if empty
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value'", line_no);
        if (section.empty())
            throw ConfigError("key outside any [section]", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line_no);
        if (value.empty()) throw ConfigError("empty value for key '" + key + "'", line_no);
        const auto& allowed = schema().at(section);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]", line_no);
        auto& sec = cfg.sections_[section];
        if (sec.count(key))
            throw ConfigError("duplicate key '" + key + "' in section [" + section + "]",
                              line_no);
        sec[key] = {value, line_no};
    }
    return cfg;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool RunConfig::has_section(const std::string& section) const {
    return sections_.count(section) != 0;
}

void RunConfig::require_sections(const std::vector<std::string>& sections) const {
    for (const auto& s : sections)
        if (!has_section(s)) throw ConfigError("missing required section [" + s + "]");
}

const RunConfig::Entry* RunConfig::find(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    auto kit = sit->second.find(key);
    return kit == sit->second.end() ? nullptr : &kit->second;
}

const RunConfig::Entry& RunConfig::must_find(const std::string& section,
                                             const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e)
        throw ConfigError("missing required key '" + key + "' in section [" + section + "]");
    return *e;
}

std::string RunConfig::get_string(const std::string& section, const std::string& key) const {
    return must_find(section, key).value;
}

int RunConfig::get_int(const std::string& section, const std::string& key) const {
    const Entry& e = must_find(section, key);
    try {
        size_t used = 0;
        const int v = std::stoi(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' must be an integer, got '" + e.value + "'", e.line);
    }
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
    const Entry& e = must_find(section, key);
    try {
        size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' must be a number, got '" + e.value + "'", e.line);
    }
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
    const Entry& e = must_find(section, key);
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw ConfigError("key '" + key + "' must be true/false, got '" + e.value + "'", e.line);
}

std::string RunConfig::get_string_or(const std::string& section, const std::string& key,
                                     const std::string& fallback) const {
    const Entry* e = find(section, key);
    return e ? e->value : fallback;
}

int RunConfig::get_int_or(const std::string& section, const std::string& key, int fallback) const {
    return find(section, key) ? get_int(section, key) : fallback;
}

double RunConfig::get_double_or(const std::string& section, const std::string& key,
                                double fallback) const {
    return find(section, key) ? get_double(section, key) : fallback;
}

bool RunConfig::get_bool_or(const std::string& section, const std::string& key,
                            bool fallback) const {
    return find(section, key) ? get_bool(section, key) : fallback;
}

Alphabet RunConfig::data_alphabet() const {
    require_sections({"data"});
    const std::string csv = get_string("data", "alphabet");
    std::vector<std::string> symbols;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            const std::string s = trim(cur);
            if (!s.empty()) symbols.push_back(s);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (symbols.empty()) throw ConfigError("alphabet must list at least one symbol");
    try {
        return Alphabet::from_symbols(symbols);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

int RunConfig::data_max_atoms() const {
    require_sections({"data"});
    const int v = get_int("data", "max_atoms");
    if (v < 1) throw ConfigError("max_atoms must be positive");
    return v;
}

VqVaeConfig RunConfig::vqvae_config() const {
    require_sections({"data", "vqvae"});
    VqVaeConfig cfg;
    cfg.l_enc = get_int("vqvae", "l_enc");
    cfg.l_dec = get_int("vqvae", "l_dec");
    cfg.d = get_int("vqvae", "d");
    cfg.heads = get_int("vqvae", "heads");
    cfg.k_c = get_int("vqvae", "k_c");
    cfg.d_c = get_int("vqvae", "d_c");
    cfg.lambda_node = get_double_or("vqvae", "lambda_node", 1.0);
    cfg.lambda_edge = get_double_or("vqvae", "lambda_edge", 1.0);
    cfg.beta = get_double_or("vqvae", "beta", 0.25);
    cfg.k_pe = get_int_or("vqvae", "k_pe", 8);
    cfg.ff_mult = get_int_or("vqvae", "ff_mult", 2);
    cfg.use_rope = get_bool_or("vqvae", "use_rope", true);
    cfg.rope_base = get_double_or("vqvae", "rope_base", 10000.0);
    cfg.ordering = scheme_from_name(get_string_or("vqvae", "ordering", "rcm"));
    cfg.alphabet = data_alphabet();
    cfg.validate();
    return cfg;
}

ArConfig RunConfig::ar_config(int k_c) const {
    require_sections({"ar"});
    ArConfig cfg;
    cfg.layers = get_int("ar", "layers");
    cfg.d = get_int("ar", "d");
    cfg.heads = get_int("ar", "heads");
    cfg.max_len = get_int("ar", "max_len");
    cfg.ff_mult = get_int_or("ar", "ff_mult", 2);
    cfg.vocab = k_c + 2;
    cfg.temperature = sample_temperature();
    cfg.top_k = sample_top_k();
    cfg.validate();
    return cfg;
}

TrainConfig RunConfig::train_config() const {
    require_sections({"train"});
    TrainConfig tc;
    tc.epochs = get_int("train", "epochs");
    tc.batch_size = get_int("train", "batch_size");
    tc.lr = get_double("train", "lr");
    tc.weight_decay = get_double_or("train", "weight_decay", 0.0);
    tc.grad_clip = get_double_or("train", "grad_clip", 1.0);
    tc.val_size = get_int_or("train", "val_size", 32);
    if (tc.epochs < 1 || tc.batch_size < 1 || tc.lr <= 0)
        throw ConfigError("[train] epochs/batch_size/lr must be positive");
    return tc;
}

uint64_t RunConfig::seed() const {
    return uint64_t(get_int_or("train", "seed", 1));
}

double RunConfig::sample_temperature() const {
    return get_double_or("sample", "temperature", 1.0);
}

int RunConfig::sample_top_k() const { return get_int_or("sample", "top_k", 0); }

int RunConfig::sample_count() const { return get_int_or("sample", "count", 100); }

int RunConfig::sample_max_len() const { return get_int_or("sample", "max_len", 64); }

} // namespace gvt
