#include "microcsi/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace microcsi {

using json = nlohmann::json;

namespace {

const int kBins = OfdmGrid::legacy20().n_used();

json parse_line(const std::string& text, int lineno) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(lineno, "invalid JSON");
    if (!j.is_object()) throw ParseError(lineno, "record is not an object");
    return j;
}

double finite_number(const json& j, int lineno, const char* what) {
    if (!j.is_number()) throw ParseError(lineno, std::string(what) + " is not a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ParseError(lineno, std::string(what) + " is not finite");
    return v;
}

Eigen::VectorXcd complex_vector(const json& j, int lineno, const char* what) {
    if (!j.is_array()) throw ParseError(lineno, std::string(what) + " is not an array");
    if (static_cast<int>(j.size()) != kBins) {
        throw DimensionError(lineno, std::string(what) + " has " +
                                         std::to_string(j.size()) + " entries, expected " +
                                         std::to_string(kBins));
    }
    Eigen::VectorXcd v(kBins);
    for (int i = 0; i < kBins; ++i) {
        const json& p = j[i];
        if (!p.is_array() || p.size() != 2) {
            throw ParseError(lineno, std::string(what) + " entry is not an [re, im] pair");
        }
        v(i) = cd(finite_number(p[0], lineno, what), finite_number(p[1], lineno, what));
    }
    return v;
}

json complex_vector_json(const Eigen::VectorXcd& v, const char* what) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i).real()) || !std::isfinite(v(i).imag())) {
            throw std::invalid_argument(std::string(what) + " holds a non-finite value");
        }
        arr.push_back(json::array({v(i).real(), v(i).imag()}));
    }
    return arr;
}

std::string get_string(const json& j, int lineno, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw ParseError(lineno, std::string("missing or non-string ") + key);
    }
    return it->get<std::string>();
}

int get_int(const json& j, int lineno, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
        throw ParseError(lineno, std::string("missing or non-integer ") + key);
    }
    return it->get<int>();
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(0, "cannot open " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

json header_line(std::istream& in, const std::string& expect_format, int version) {
    std::string text;
    if (!std::getline(in, text)) throw ParseError(0, "missing header line");
    json h = parse_line(text, 1);
    if (h.value("format", "") != expect_format) {
        throw ParseError(1, "unexpected format, want " + expect_format);
    }
    if (h.value("version", -1) != version) {
        throw ParseError(1, "unsupported version");
    }
    return h;
}

json fingerprint_json(const Fingerprint& fp) {
    json j;
    j["values"] = complex_vector_json(fp.values, "fingerprint values");
    j["n_csi_used"] = fp.n_csi_used;
    j["n_kept"] = fp.n_kept;
    j["device_claim"] = fp.device_claim;
    if (fp.n_fallback_subcarriers > 0) {
        j["fallback_subcarriers"] = fp.n_fallback_subcarriers;
    }
    return j;
}

const json& require(const json& j, int lineno, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(lineno, std::string("missing ") + key);
    return *it;
}

Fingerprint fingerprint_from_json(const json& j, int lineno) {
    Fingerprint fp;
    fp.values = complex_vector(require(j, lineno, "values"), lineno, "values");
    fp.n_csi_used = get_int(j, lineno, "n_csi_used");
    fp.n_kept = get_int(j, lineno, "n_kept");
    fp.device_claim = get_string(j, lineno, "device_claim");
    if (j.contains("fallback_subcarriers")) {
        fp.n_fallback_subcarriers = get_int(j, lineno, "fallback_subcarriers");
    }
    return fp;
}

} // namespace

std::vector<CsiMeasurement> read_csi_dataset(std::istream& in) {
    std::vector<CsiMeasurement> out;
    std::string text;
    int lineno = 0;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        json j = parse_line(text, lineno);
        CsiMeasurement m;
        m.device_id = get_string(j, lineno, "device_id");
        m.packet_index = get_int(j, lineno, "packet_index");
        int n_rx = get_int(j, lineno, "n_rx");
        if (n_rx < 1) throw ParseError(lineno, "n_rx must be >= 1");
        auto chains = j.find("chains");
        if (chains == j.end() || !chains->is_array()) {
            throw ParseError(lineno, "missing chains array");
        }
        if (static_cast<int>(chains->size()) != n_rx) {
            throw ParseError(lineno, "chains count does not match n_rx");
        }
        for (const auto& c : *chains) {
            m.chains.push_back(complex_vector(c, lineno, "chain"));
        }
        if (auto it = j.find("snr_db"); it != j.end()) {
            m.snr_db = finite_number(*it, lineno, "snr_db");
        }
        if (auto it = j.find("flags"); it != j.end()) {
            if (!it->is_array()) throw ParseError(lineno, "flags is not an array");
            for (const auto& f : *it) {
                if (!f.is_string()) throw ParseError(lineno, "flag is not a string");
                m.flags.push_back(f.get<std::string>());
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<CsiMeasurement> read_csi_dataset(const std::string& path) {
    auto in = open_input(path);
    return read_csi_dataset(in);
}

void write_csi_dataset(std::ostream& out, const std::vector<CsiMeasurement>& ms) {
    for (const auto& m : ms) {
        json j;
        j["device_id"] = m.device_id;
        j["packet_index"] = m.packet_index;
        j["n_rx"] = m.n_rx();
        json chains = json::array();
        for (const auto& c : m.chains) chains.push_back(complex_vector_json(c, "chain"));
        j["chains"] = std::move(chains);
        if (m.snr_db && std::isfinite(*m.snr_db)) j["snr_db"] = *m.snr_db;
        if (!m.flags.empty()) j["flags"] = m.flags;
        out << j.dump() << '\n';
    }
}

void write_csi_dataset(const std::string& path, const std::vector<CsiMeasurement>& ms) {
    auto out = open_output(path);
    write_csi_dataset(out, ms);
}

FingerprintLibrary read_library(const std::string& path) {
    auto in = open_input(path);
    json h = header_line(in, "microcsi-library", 1);
    FingerprintLibrary lib;
    lib.identity = get_string(h, 1, "identity");
    lib.k = get_int(h, 1, "k");
    int s = get_int(h, 1, "s");

    std::string text;
    int lineno = 1;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        lib.fingerprints.push_back(fingerprint_from_json(parse_line(text, lineno), lineno));
    }
    if (lib.size() != s) throw ParseError(0, "header count does not match records");
    if (lib.size() < 1) throw ParseError(0, "library holds no fingerprints");
    if (lib.k < 1 || lib.k > lib.size()) throw ParseError(1, "k outside [1, S]");
    return lib;
}

void write_library(const std::string& path, const FingerprintLibrary& lib) {
    if (lib.size() < 1) throw std::invalid_argument("refusing to write an empty library");
    if (lib.k < 1 || lib.k > lib.size()) throw std::invalid_argument("k outside [1, S]");
    auto out = open_output(path);
    json h;
    h["format"] = "microcsi-library";
    h["version"] = 1;
    h["identity"] = lib.identity;
    h["s"] = lib.size();
    h["k"] = lib.k;
    out << h.dump() << '\n';
    for (const auto& fp : lib.fingerprints) out << fingerprint_json(fp).dump() << '\n';
}

std::vector<Fingerprint> read_fingerprints(const std::string& path) {
    auto in = open_input(path);
    header_line(in, "microcsi-fingerprints", 1);
    std::vector<Fingerprint> fps;
    std::string text;
    int lineno = 1;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        fps.push_back(fingerprint_from_json(parse_line(text, lineno), lineno));
    }
    return fps;
}

void write_fingerprints(const std::string& path, const std::vector<Fingerprint>& fps) {
    auto out = open_output(path);
    json h;
    h["format"] = "microcsi-fingerprints";
    h["version"] = 1;
    out << h.dump() << '\n';
    for (const auto& fp : fps) out << fingerprint_json(fp).dump() << '\n';
}

std::vector<MicroCsi> read_micro_csi(const std::string& path) {
    auto in = open_input(path);
    header_line(in, "microcsi-micro", 1);
    std::vector<MicroCsi> mcs;
    std::string text;
    int lineno = 1;
    while (std::getline(in, text)) {
        ++lineno;
        if (text.empty()) continue;
        json j = parse_line(text, lineno);
        MicroCsi mc;
        mc.values = complex_vector(require(j, lineno, "values"), lineno, "values");
        mc.device_id = get_string(j, lineno, "device_id");
        mc.packet_index = get_int(j, lineno, "packet_index");
        mc.chain_index = get_int(j, lineno, "chain_index");
        mcs.push_back(std::move(mc));
    }
    return mcs;
}

void write_micro_csi(const std::string& path, const std::vector<MicroCsi>& mcs) {
    auto out = open_output(path);
    json h;
    h["format"] = "microcsi-micro";
    h["version"] = 1;
    out << h.dump() << '\n';
    for (const auto& mc : mcs) {
        json j;
        j["device_id"] = mc.device_id;
        j["packet_index"] = mc.packet_index;
        j["chain_index"] = mc.chain_index;
        j["values"] = complex_vector_json(mc.values, "micro-CSI values");
        out << j.dump() << '\n';
    }
}

Scenario read_scenario(const std::string& path) {
    auto in = open_input(path);
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw ParseError(0, "scenario is not valid JSON");
    if (!j.is_object()) throw ParseError(0, "scenario must be a JSON object");

    Scenario sc;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "devices") sc.n_devices = val.get<int>();
            else if (key == "packets") sc.n_packets = val.get<int>();
            else if (key == "n_rx") sc.n_rx = val.get<int>();
            else if (key == "snr_db") sc.snr_db = val.get<double>();
            else if (key == "intensity_min") sc.intensity_min = val.get<double>();
            else if (key == "intensity_max") sc.intensity_max = val.get<double>();
            else if (key == "n_p_sim") sc.n_p_sim = val.get<int>();
            else if (key == "case1_rate") sc.case1_rate = val.get<double>();
            else if (key == "case2_rate") sc.case2_rate = val.get<double>();
            else if (key == "speed_mps") sc.speed_mps = val.get<double>();
            else if (key == "carrier_hz") sc.carrier_hz = val.get<double>();
            else if (key == "packet_interval_s") sc.packet_interval_s = val.get<double>();
            else if (key == "seed") sc.seed = val.get<std::uint64_t>();
            else if (key == "channel_seed") sc.channel_seed = val.get<std::uint64_t>();
            else throw ParseError(0, "unknown scenario key: " + key);
        }
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("scenario: ") + e.what());
    }
    return sc;
}

} // namespace microcsi
