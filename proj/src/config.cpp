#include "hjbverify/cli.hpp"
#include "hjbverify/io.hpp"
#include "hjbverify/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace hjbv {

namespace {

struct Key {
    const char* section;
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& s) {
    const double v = parse_double(s);
    if (!std::isfinite(v)) {
        throw std::invalid_argument("expected a finite number");
    }
    return v;
}

template <typename Int>
Int to_int(const std::string& s) {
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument("expected an integer");
    }
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    throw std::invalid_argument("expected true or false");
}

void one_of(const std::string& s, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (s == a) {
            return;
        }
    }
    std::string msg = "expected one of";
    for (const char* a : allowed) {
        msg += std::string(" ") + a;
    }
    throw std::invalid_argument(msg);
}

#define HJBV_DOUBLE(sec, field)                                                                                        \
    Key {                                                                                                              \
        sec, #field, [](RunConfig& c, const std::string& s) { c.field = to_double(s); },                              \
            [](const RunConfig& c) { return format_double(c.field); }                                                  \
    }
#define HJBV_INT(sec, field)                                                                                           \
    Key {                                                                                                              \
        sec, #field, [](RunConfig& c, const std::string& s) { c.field = to_int<int>(s); },                            \
            [](const RunConfig& c) { return std::to_string(c.field); }                                                 \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table{
        Key{"problem", "kind",
            [](RunConfig& c, const std::string& s) {
                one_of(s, {"advertising", "exit_demo", "discounted_constant"});
                c.kind = s;
            },
            [](const RunConfig& c) { return c.kind; }},
        HJBV_DOUBLE("problem", eta),
        HJBV_DOUBLE("problem", alpha),
        HJBV_DOUBLE("problem", beta),
        HJBV_DOUBLE("problem", T),
        Key{"problem", "negative_branch",
            [](RunConfig& c, const std::string& s) {
                one_of(s, {"linear", "hjb_consistent"});
                c.negative_branch = s;
            },
            [](const RunConfig& c) { return c.negative_branch; }},
        Key{"problem", "demo",
            [](RunConfig& c, const std::string& s) {
                one_of(s, {"constant", "expected_exit_time"});
                c.demo = s;
            },
            [](const RunConfig& c) { return c.demo; }},
        HJBV_DOUBLE("problem", cost),
        HJBV_DOUBLE("problem", rate),
        HJBV_DOUBLE("grid", x_min),
        HJBV_DOUBLE("grid", x_max),
        HJBV_INT("grid", nx),
        HJBV_INT("grid", nt),
        HJBV_INT("grid", ladder_levels),
        HJBV_INT("mc", paths),
        HJBV_DOUBLE("mc", dt),
        Key{"mc", "seed", [](RunConfig& c, const std::string& s) { c.seed = to_int<std::uint64_t>(s); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
        Key{"mc", "exit_rule",
            [](RunConfig& c, const std::string& s) {
                one_of(s, {"grid_crossing", "brownian_bridge"});
                c.exit_rule = s;
            },
            [](const RunConfig& c) { return c.exit_rule; }},
        HJBV_INT("mc", path_stride),
        HJBV_INT("mc", csv_paths),
        Key{"verify", "policy",
            [](RunConfig& c, const std::string& s) {
                if (s.rfind("constant:", 0) == 0) {
                    to_double(s.substr(9));
                } else {
                    one_of(s, {"feedback", "zero", "constant:<value>"});
                }
                c.policy = s;
            },
            [](const RunConfig& c) { return c.policy; }},
        Key{"verify", "field",
            [](RunConfig& c, const std::string& s) {
                if (s.rfind("csv:", 0) != 0 || s.size() == 4) {
                    one_of(s, {"closed_form", "solved", "csv:<path>"});
                }
                c.field = s;
            },
            [](const RunConfig& c) { return c.field; }},
        Key{"verify", "tolerance",
            [](RunConfig& c, const std::string& s) {
                if (s == "auto") {
                    c.tolerance.reset();
                } else {
                    c.tolerance = to_double(s);
                }
            },
            [](const RunConfig& c) { return c.tolerance ? format_double(*c.tolerance) : std::string("auto"); }},
        HJBV_DOUBLE("verify", c_dx),
        HJBV_DOUBLE("verify", c_dt),
        HJBV_DOUBLE("verify", t0),
        HJBV_DOUBLE("verify", x0),
        HJBV_DOUBLE("verify", truncation_T1),
        Key{"verify", "necessity", [](RunConfig& c, const std::string& s) { c.necessity = to_bool(s); },
            [](const RunConfig& c) { return std::string(c.necessity ? "true" : "false"); }},
        Key{"verify", "control_variate", [](RunConfig& c, const std::string& s) { c.control_variate = to_bool(s); },
            [](const RunConfig& c) { return std::string(c.control_variate ? "true" : "false"); }},
    };
    return table;
}

#undef HJBV_DOUBLE
#undef HJBV_INT

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

RunConfig parse_config(std::istream& is, const std::string& source) {
    RunConfig c;
    std::string section;
    std::string raw;
    std::set<std::string> seen;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        std::ostringstream os;
        os << source << ":" << lineno << ": " << what;
        throw DomainError(os.str());
    };
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                fail("malformed section header '" + line + "'");
            }
            section = trim(line.substr(1, line.size() - 2));
            const bool known = std::any_of(keys().begin(), keys().end(), [&](const Key& k) { return section == k.section; });
            if (!known) {
                fail("unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail("expected 'key = value', got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) {
            fail("key '" + key + "' appears before any section header");
        }
        const auto it = std::find_if(keys().begin(), keys().end(),
                                     [&](const Key& k) { return section == k.section && key == k.name; });
        if (it == keys().end()) {
            fail("unknown key '" + key + "' in section [" + section + "]");
        }
        if (!seen.insert(section + "." + key).second) {
            fail("duplicate key '" + key + "' in section [" + section + "]");
        }
        try {
            it->set(c, value);
        } catch (const std::invalid_argument& e) {
            fail("key '" + key + "': bad value '" + value + "' (" + e.what() + ")");
        }
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DomainError("cannot open config file " + path.string());
    }
    return parse_config(in, path.string());
}

std::string echo_config(const RunConfig& config) {
    std::ostringstream os;
    std::string section;
    for (const Key& k : keys()) {
        if (section != k.section) {
            if (!section.empty()) {
                os << '\n';
            }
            section = k.section;
            os << '[' << section << "]\n";
        }
        os << k.name << " = " << k.get(config) << '\n';
    }
    return os.str();
}

} // namespace hjbv
