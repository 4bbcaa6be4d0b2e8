#include "gfad/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "gfad/error.hpp"

namespace gfad::cli {

namespace {

using nlohmann::json;

// JSON values carry no source positions, so keys are located in the raw text
// to anchor messages to a line.
class Reader {
public:
    explicit Reader(const std::string& text) : text_(text) {}

    std::size_t line_at(std::size_t pos) const {
        pos = std::min(pos, text_.size());
        return 1 + static_cast<std::size_t>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
    }

    [[noreturn]] void fail(std::size_t pos, const std::string& msg) const {
        throw ConfigError("line " + std::to_string(line_at(pos)) + ": " + msg);
    }

    std::size_t key_pos(const std::string& key, std::size_t from) const {
        const std::string quoted = "\"" + key + "\"";
        std::size_t p = text_.find(quoted, from);
        while (p != std::string::npos) {
            std::size_t q = p + quoted.size();
            while (q < text_.size() && std::isspace(static_cast<unsigned char>(text_[q]))) ++q;
            if (q < text_.size() && text_[q] == ':') return p;
            p = text_.find(quoted, p + 1);
        }
        return from;
    }

    void check_object(const json& j, const std::string& where, std::size_t pos) const {
        if (!j.is_object()) fail(pos, "'" + where + "' must be an object");
    }

    void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where,
                    std::size_t from) const {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; });
            if (!ok) {
                std::string list;
                for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
                fail(key_pos(it.key(), from),
                     "unknown key '" + it.key() + "' in " + where + " (allowed: " + list + ")");
            }
        }
    }

    double number(const json& obj, const char* key, double fallback, std::size_t from) const {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number()) fail(key_pos(key, from), std::string("'") + key + "' must be a number");
        return v.get<double>();
    }

    std::size_t count(const json& obj, const char* key, std::size_t fallback, std::size_t from,
                      bool allow_zero = false) const {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        const bool integral = v.is_number_integer() ||
                              (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
        if (!integral || v.get<double>() < (allow_zero ? 0.0 : 1.0))
            fail(key_pos(key, from), std::string("'") + key + "' must be " +
                                         (allow_zero ? "a non-negative" : "a positive") + " integer");
        return static_cast<std::size_t>(v.get<double>());
    }

    bool boolean(const json& obj, const char* key, bool fallback, std::size_t from) const {
        if (!obj.contains(key)) return fallback;
        if (!obj.at(key).is_boolean()) fail(key_pos(key, from), std::string("'") + key + "' must be true or false");
        return obj.at(key).get<bool>();
    }

    std::string string(const json& obj, const char* key, const std::string& fallback, std::size_t from) const {
        if (!obj.contains(key)) return fallback;
        if (!obj.at(key).is_string()) fail(key_pos(key, from), std::string("'") + key + "' must be a string");
        return obj.at(key).get<std::string>();
    }

    // Runs f and re-raises ConfigError anchored at pos.
    template <class F>
    auto anchored(std::size_t pos, F&& f) const {
        try {
            return f();
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            if (msg.rfind("line ", 0) == 0) throw;
            fail(pos, msg);
        } catch (const CapabilityError& e) {
            fail(pos, e.what());
        }
    }

private:
    const std::string& text_;
};

SystemConfig parse_system(const Reader& r, const json& j, std::size_t pos) {
    r.check_object(j, "system", pos);
    r.check_keys(j, {"n_devices", "n_subcarriers", "n_antennas", "n_taps", "noise_var", "gains"}, "system", pos);
    SystemConfig cfg;
    cfg.n_devices = r.count(j, "n_devices", cfg.n_devices, pos);
    cfg.n_subcarriers = r.count(j, "n_subcarriers", cfg.n_subcarriers, pos);
    cfg.n_antennas = r.count(j, "n_antennas", cfg.n_antennas, pos);
    cfg.n_taps = r.count(j, "n_taps", cfg.n_taps, pos);
    cfg.noise_var = r.number(j, "noise_var", cfg.noise_var, pos);
    if (j.contains("gains")) {
        const std::size_t gp = r.key_pos("gains", pos);
        const json& g = j.at("gains");
        if (!g.is_array()) r.fail(gp, "'gains' must be an array of numbers");
        for (const auto& v : g) {
            if (!v.is_number()) r.fail(gp, "'gains' must be an array of numbers");
            cfg.gains.push_back(v.get<double>());
        }
    }
    r.anchored(pos, [&] { cfg.validate(); });
    return cfg;
}

PriorModel parse_prior(const Reader& r, const json& j, std::size_t pos, std::size_t n_devices) {
    r.check_object(j, "prior", pos);
    const std::string kind = r.string(j, "kind", "iid", pos);
    if (kind == "iid") {
        r.check_keys(j, {"kind", "q"}, "prior", pos);
        const double q = r.number(j, "q", 0.05, pos);
        return r.anchored(r.key_pos("q", pos), [&] { return PriorModel::iid(q); });
    }
    if (kind == "group") {
        r.check_keys(j, {"kind", "q", "k_groups", "group_size", "epsilon"}, "prior", pos);
        const double q = r.number(j, "q", 0.05, pos);
        const double eps = r.number(j, "epsilon", 1e-3, pos);
        std::size_t k = 0;
        if (j.contains("k_groups") && j.contains("group_size"))
            r.fail(r.key_pos("group_size", pos), "give either 'k_groups' or 'group_size', not both");
        if (j.contains("k_groups")) {
            k = r.count(j, "k_groups", 1, pos);
        } else if (j.contains("group_size")) {
            const std::size_t s = r.count(j, "group_size", 1, pos);
            if (n_devices % s != 0)
                r.fail(r.key_pos("group_size", pos),
                       "group_size " + std::to_string(s) + " does not divide n_devices " + std::to_string(n_devices));
            k = n_devices / s;
        } else {
            r.fail(pos, "group prior needs 'k_groups' or 'group_size'");
        }
        return r.anchored(pos, [&] { return PriorModel::group_uniform(n_devices, k, q, eps); });
    }
    if (kind == "mvb") {
        r.check_keys(j, {"kind", "coeffs"}, "prior", pos);
        const std::size_t cp = r.key_pos("coeffs", pos);
        if (!j.contains("coeffs") || !j.at("coeffs").is_array()) r.fail(cp, "mvb prior needs a 'coeffs' array");
        std::vector<MvbTerm> terms;
        for (const auto& t : j.at("coeffs")) {
            if (!t.is_object()) r.fail(cp, "each coefficient must be an object {\"omega\": [...], \"c\": ...}");
            r.check_keys(t, {"omega", "c"}, "mvb coefficient", cp);
            MvbTerm term;
            if (!t.contains("omega") || !t.at("omega").is_array()) r.fail(cp, "coefficient needs an 'omega' array");
            for (const auto& o : t.at("omega")) {
                if (!o.is_number_unsigned()) r.fail(cp, "omega entries must be non-negative device indices");
                term.omega.push_back(o.get<std::size_t>());
            }
            if (!t.contains("c") || !t.at("c").is_number()) r.fail(cp, "coefficient needs a numeric 'c'");
            term.c = t.at("c").get<double>();
            terms.push_back(std::move(term));
        }
        return r.anchored(cp, [&] { return PriorModel::mvb(n_devices, std::move(terms)); });
    }
    r.fail(r.key_pos("kind", pos), "unknown prior kind '" + kind + "' (expected iid, group or mvb)");
}

DetectorConfig parse_detector_config(const Reader& r, const json& j, std::size_t pos) {
    r.check_object(j, "detector", pos);
    r.check_keys(j, {"kind", "rho", "max_sweeps", "tol", "rho_continuation", "rho_max", "refresh_interval", "order"},
                 "detector", pos);
    DetectorConfig d;
    const std::string kind = r.string(j, "kind", "ml-act", pos);
    d.kind = r.anchored(r.key_pos("kind", pos), [&] { return parse_detector(kind); });
    d.rho = r.number(j, "rho", d.rho, pos);
    d.max_sweeps = r.count(j, "max_sweeps", d.max_sweeps, pos);
    d.tol = r.number(j, "tol", d.tol, pos);
    d.rho_continuation = r.boolean(j, "rho_continuation", d.rho_continuation, pos);
    d.rho_max = r.number(j, "rho_max", d.rho_max, pos);
    d.refresh_interval = r.count(j, "refresh_interval", d.refresh_interval, pos);
    const std::string order = r.string(j, "order", "natural", pos);
    if (order == "natural") {
        d.order = CoordinateOrder::Natural;
    } else if (order == "random") {
        d.order = CoordinateOrder::RandomPerSweep;
    } else {
        r.fail(r.key_pos("order", pos), "'order' must be \"natural\" or \"random\"");
    }
    r.anchored(pos, [&] { d.validate(); });
    return d;
}

} // namespace

RunConfig parse_run_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        Reader r(text);
        r.fail(e.byte == 0 ? 0 : e.byte - 1, std::string("invalid JSON: ") + e.what());
    }
    const Reader r(text);
    r.check_object(root, "config", 0);
    r.check_keys(root, {"system", "prior", "detector", "trials", "seed", "threshold", "calibration_trials",
                        "shared_pilots", "sweep", "output", "threads"},
                 "config", 0);

    RunConfig rc;
    ExperimentSpec& spec = rc.spec;
    if (root.contains("system")) spec.system = parse_system(r, root.at("system"), r.key_pos("system", 0));
    if (root.contains("prior"))
        spec.prior = parse_prior(r, root.at("prior"), r.key_pos("prior", 0), spec.system.n_devices);
    if (root.contains("detector"))
        spec.detector = parse_detector_config(r, root.at("detector"), r.key_pos("detector", 0));
    spec.trials = r.count(root, "trials", spec.trials, 0);
    if (root.contains("seed")) {
        const json& s = root.at("seed");
        if (!s.is_number_unsigned()) r.fail(r.key_pos("seed", 0), "'seed' must be a non-negative integer");
        spec.seed = s.get<std::uint64_t>();
    }
    if (root.contains("threshold")) {
        const json& t = root.at("threshold");
        const std::size_t tp = r.key_pos("threshold", 0);
        if (t.is_string()) {
            if (t.get<std::string>() != "calibrate") r.fail(tp, "'threshold' must be \"calibrate\" or a number");
        } else if (t.is_number()) {
            const double v = t.get<double>();
            if (!(v >= 0.0 && v <= 1.0)) r.fail(tp, "'threshold' must lie in [0, 1]");
            spec.threshold = v;
        } else {
            r.fail(tp, "'threshold' must be \"calibrate\" or a number");
        }
    }
    spec.calibration_trials = r.count(root, "calibration_trials", 0, 0, true);
    spec.shared_pilots = r.boolean(root, "shared_pilots", false, 0);
    rc.threads = r.count(root, "threads", 0, 0, true);
    r.anchored(0, [&] { spec.validate(); });

    if (root.contains("sweep")) {
        const std::size_t sp = r.key_pos("sweep", 0);
        const json& s = root.at("sweep");
        r.check_object(s, "sweep", sp);
        r.check_keys(s, {"parameter", "values", "detectors"}, "sweep", sp);
        SweepConfig sc;
        if (!s.contains("parameter")) r.fail(sp, "sweep needs a 'parameter'");
        const std::string name = r.string(s, "parameter", "", sp);
        sc.parameter = r.anchored(r.key_pos("parameter", sp), [&] { return parse_sweep_parameter(name); });
        const std::size_t vp = r.key_pos("values", sp);
        if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
            r.fail(vp, "sweep needs a nonempty 'values' array");
        for (const auto& v : s.at("values")) {
            if (sc.parameter == SweepParameter::Detector) {
                if (!v.is_string()) r.fail(vp, "detector sweep values must be detector names");
                sc.values.emplace_back(r.anchored(vp, [&] { return parse_detector(v.get<std::string>()); }));
            } else {
                if (!v.is_number()) r.fail(vp, "sweep values for '" + name + "' must be numbers");
                sc.values.emplace_back(v.get<double>());
            }
            r.anchored(vp, [&] {
                ExperimentSpec probe = apply_sweep_value(spec, sc.parameter, sc.values.back());
                probe.validate();
            });
        }
        if (s.contains("detectors")) {
            const std::size_t dp = r.key_pos("detectors", sp);
            if (!s.at("detectors").is_array()) r.fail(dp, "'detectors' must be an array of detector names");
            if (sc.parameter == SweepParameter::Detector) r.fail(dp, "'detectors' cannot be combined with a detector sweep");
            for (const auto& d : s.at("detectors")) {
                if (!d.is_string()) r.fail(dp, "'detectors' must be an array of detector names");
                sc.detectors.push_back(r.anchored(dp, [&] { return parse_detector(d.get<std::string>()); }));
            }
        }
        rc.sweep = std::move(sc);
    }

    if (root.contains("output")) {
        const std::size_t op = r.key_pos("output", 0);
        const json& o = root.at("output");
        r.check_object(o, "output", op);
        r.check_keys(o, {"csv", "svg"}, "output", op);
        if (o.contains("csv")) rc.csv_path = r.string(o, "csv", "", op);
        if (o.contains("svg")) {
            rc.svg_path = r.string(o, "svg", "", op);
            const bool numeric_sweep = rc.sweep && rc.sweep->parameter != SweepParameter::Detector;
            if (!numeric_sweep) r.fail(r.key_pos("svg", op), "svg output needs a sweep over P, L, M, q or group_size");
        }
    }
    return rc;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string format_csv_row(const MetricRow& r) {
    std::ostringstream os;
    os << r.detector << ',' << r.n_devices << ',' << r.n_subcarriers << ',' << r.n_antennas << ',' << r.n_taps << ','
       << format_number(r.q) << ',' << r.trials << ',' << r.seed << ',' << format_number(r.threshold) << ','
       << format_number(r.error_rate) << ',' << format_number(r.miss_rate) << ','
       << format_number(r.false_alarm_rate) << ',' << format_number(r.avg_sweeps) << ','
       << format_number(r.avg_runtime_ms);
    return os.str();
}

void write_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) os << format_csv_row(r) << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("csv: no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& is) {
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) out.push_back(field);
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ConfigError("csv line " + std::to_string(line_no) + ": expected " +
                              std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw ConfigError("csv: file is empty");
    return t;
}

namespace {

double parse_double(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("csv: " + what + " value '" + s + "' is not a number");
    return v;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt_tick(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

} // namespace

std::string render_svg(const CsvTable& table, const std::string& x_column) {
    if (table.rows.empty()) throw ConfigError("csv: no data rows to plot");
    const std::size_t cx = table.column(x_column);
    const std::size_t cd = table.column("detector");
    const std::size_t ce = table.column("error_rate");
    const std::size_t cn = table.column("N");
    const std::size_t ct = table.column("trials");

    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::vector<std::string> order;
    double floor_val = std::numeric_limits<double>::infinity();
    struct Raw {
        std::string det;
        double x, y, floor;
    };
    std::vector<Raw> raw;
    for (const auto& row : table.rows) {
        const double x = parse_double(row[cx], x_column);
        const double y = parse_double(row[ce], "error_rate");
        const double n = parse_double(row[cn], "N");
        const double tr = parse_double(row[ct], "trials");
        if (!std::isfinite(x) || !(y >= 0.0) || !(n >= 1.0) || !(tr >= 1.0))
            throw ConfigError("csv: row has out-of-range values");
        const double f = 1.0 / (2.0 * n * tr);
        floor_val = std::min(floor_val, f);
        raw.push_back({row[cd], x, y, f});
    }
    for (const auto& r : raw) {
        if (!series.count(r.det)) order.push_back(r.det);
        series[r.det].emplace_back(r.x, r.y > 0.0 ? r.y : r.floor);
    }
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (auto& [name, pts] : series) {
        std::sort(pts.begin(), pts.end());
        for (const auto& [x, y] : pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmax == xmin) {
        xmin -= 1.0;
        xmax += 1.0;
    }
    double lo = std::floor(std::log10(ymin)), hi = std::ceil(std::log10(ymax));
    if (hi <= lo) hi = lo + 1.0;

    const double W = 720, H = 460, ml = 80, mr = 170, mt = 50, mb = 60;
    const double pw = W - ml - mr, ph = H - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + (hi - std::log10(y)) / (hi - lo) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                   "#7f7f7f"};

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    const std::string title = "error rate vs " + x_column + " (zero rates drawn at floor 1/(2 N trials) = " +
                              fmt_tick(floor_val) + ")";
    os << "<title>" << xml_escape(title) << "</title>\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
       << xml_escape(title) << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double e = lo; e <= hi + 1e-9; e += 1.0) {
        const double y = sy(std::pow(10.0, e));
        os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
           << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << static_cast<int>(e)
           << "</text>\n";
    }
    std::vector<double> xs;
    for (const auto& [name, pts] : series)
        for (const auto& p : pts) xs.push_back(p.first);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() > 10) {
        xs.clear();
        for (int k = 0; k <= 4; ++k) xs.push_back(xmin + (xmax - xmin) * k / 4.0);
    }
    for (double x : xs) {
        os << "<text x=\"" << sx(x) << "\" y=\"" << mt + ph + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_tick(x) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(x_column)
       << "</text>\n";
    os << "<text x=\"20\" y=\"" << mt + ph / 2 << "\" transform=\"rotate(-90 20 " << mt + ph / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">error rate</text>\n";

    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& pts = series[order[k]];
        const char* color = colors[k % (sizeof(colors) / sizeof(colors[0]))];
        os << "<polyline class=\"series\" data-detector=\"" << xml_escape(order[k]) << "\" fill=\"none\" stroke=\""
           << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            os << (i ? " " : "") << sx(pts[i].first) << ',' << sy(pts[i].second);
        os << "\"/>\n";
        for (const auto& p : pts)
            os << "<circle cx=\"" << sx(p.first) << "\" cy=\"" << sy(p.second) << "\" r=\"3\" fill=\"" << color
               << "\"/>\n";
        const double ly = mt + 10 + 20.0 * static_cast<double>(k);
        os << "<g class=\"legend\"><line x1=\"" << ml + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 40
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << ml + pw + 46
           << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(order[k])
           << "</text></g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

int cmd_run(const std::string& config_path, std::size_t threads, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        rc = parse_run_config(buf.str());
    } catch (const ConfigError& e) {
        err << "config error: " << config_path << ": " << e.what() << '\n';
        return 2;
    }
    RunOptions opts{threads != 0 ? threads : rc.threads};

    std::vector<MetricRow> rows;
    try {
        if (rc.sweep) {
            rows = sweep(rc.spec, rc.sweep->parameter, rc.sweep->values, rc.sweep->detectors, opts);
        } else {
            rows.push_back(run_experiment(rc.spec, opts));
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "experiment error: " << e.what() << '\n';
        return 3;
    }
    for (const auto& r : rows)
        err << r.detector << " N=" << r.n_devices << " L=" << r.n_subcarriers << " M=" << r.n_antennas
            << " P=" << r.n_taps << " error_rate=" << format_number(r.error_rate) << '\n';

    std::ostringstream csv;
    write_csv(csv, rows);
    if (rc.csv_path) {
        std::ofstream f(*rc.csv_path);
        if (!f) {
            err << "experiment error: cannot write '" << *rc.csv_path << "'\n";
            return 3;
        }
        f << csv.str();
    } else {
        out << csv.str();
    }
    if (rc.svg_path) {
        std::istringstream in(csv.str());
        CsvTable table = read_csv(in);
        std::string x = sweep_parameter_name(rc.sweep->parameter);
        if (rc.sweep->parameter == SweepParameter::GroupSize) {
            // The CSV has no group-size column; rows follow the configured value order.
            table.header.push_back(x);
            const std::size_t per_value = rc.sweep->detectors.empty() ? 1 : rc.sweep->detectors.size();
            for (std::size_t k = 0; k < table.rows.size(); ++k)
                table.rows[k].push_back(format_number(std::get<double>(rc.sweep->values[k / per_value])));
        }
        std::ofstream f(*rc.svg_path);
        if (!f) {
            err << "experiment error: cannot write '" << *rc.svg_path << "'\n";
            return 3;
        }
        f << render_svg(table, x);
    }
    return 0;
}

int cmd_plot(const std::string& csv_path, const std::string& x_column, const std::string& svg_path,
             std::ostream& err) {
    std::string svg;
    try {
        std::ifstream in(csv_path);
        if (!in) throw ConfigError("cannot read '" + csv_path + "'");
        svg = render_svg(read_csv(in), x_column);
    } catch (const ConfigError& e) {
        err << "plot error: " << e.what() << '\n';
        return 2;
    }
    std::ofstream f(svg_path);
    if (!f) {
        err << "plot error: cannot write '" << svg_path << "'\n";
        return 2;
    }
    f << svg;
    return 0;
}

} // namespace gfad::cli
