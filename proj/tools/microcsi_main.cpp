#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "microcsi/eval.hpp"
#include "microcsi/io.hpp"
#include "microcsi/matcher.hpp"
#include "microcsi/sim.hpp"

namespace {

using namespace microcsi;

struct SharedFlags {
    int n_csi = 20;
    int n_p = 8;
    double omega1 = kOmega1;
    double omega2 = kOmega2;
    std::string metric = "manhattan";
    double eps_fade = 1e-3;
    bool no_oe = false;
    bool no_fn = false;
};

void add_pipeline_flags(CLI::App* cmd, SharedFlags& f, bool with_n_csi = true) {
    if (with_n_csi) {
        cmd->add_option("--n-csi", f.n_csi, "measurements pooled per fingerprint")
            ->check(CLI::PositiveNumber);
    }
    cmd->add_option("--np", f.n_p, "tap support half-width")->check(CLI::NonNegativeNumber);
    cmd->add_option("--omega1", f.omega1, "gradient-variance gate");
    cmd->add_option("--omega2", f.omega2, "per-subcarrier Z-score gate");
    cmd->add_option("--eps-fade", f.eps_fade, "relative deep-fade threshold");
    cmd->add_flag("--no-oe", f.no_oe, "disable outlier elimination");
    cmd->add_flag("--no-fn", f.no_fn, "disable fingerprint normalization");
}

PipelineParams to_params(const SharedFlags& f) {
    PipelineParams p;
    p.n_p = f.n_p;
    p.omega1 = f.omega1;
    p.omega2 = f.omega2;
    p.eps_fade = f.eps_fade;
    p.outlier_elimination = !f.no_oe;
    p.normalize = !f.no_fn;
    return p;
}

std::vector<double> parse_far_targets(const std::vector<double>& v) {
    return v.empty() ? std::vector<double>{0.0} : v;
}

int run(int argc, char** argv) {
    CLI::App app{"micro-CSI device fingerprinting pipeline"};
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic CSI dataset");
    std::string sim_config, sim_out;
    std::optional<int> o_devices, o_packets, o_nrx, o_npsim;
    std::optional<double> o_snr, o_imin, o_imax, o_c1, o_c2, o_speed;
    std::optional<std::uint64_t> o_seed, o_chseed;
    sim_cmd->add_option("--config", sim_config, "scenario JSON file");
    sim_cmd->add_option("--out", sim_out, "output dataset path")->required();
    sim_cmd->add_option("--devices", o_devices, "fleet size");
    sim_cmd->add_option("--packets", o_packets, "packets per device");
    sim_cmd->add_option("--n-rx", o_nrx, "receive chains per packet");
    sim_cmd->add_option("--np-sim", o_npsim, "channel tap support half-width");
    sim_cmd->add_option("--snr", o_snr, "SNR in dB ('inf' for noiseless)");
    sim_cmd->add_option("--intensity-min", o_imin, "distortion intensity lower bound");
    sim_cmd->add_option("--intensity-max", o_imax, "distortion intensity upper bound");
    sim_cmd->add_option("--case1-rate", o_c1, "per-bin spike anomaly rate");
    sim_cmd->add_option("--case2-rate", o_c2, "time-domain clipping anomaly rate");
    sim_cmd->add_option("--speed", o_speed, "terminal speed in m/s");
    sim_cmd->add_option("--seed", o_seed, "device/noise seed");
    sim_cmd->add_option("--channel-seed", o_chseed, "channel realization seed");

    // extract
    auto* ext_cmd = app.add_subcommand("extract", "recover micro-CSI from a dataset");
    SharedFlags ext_flags;
    std::string ext_in, ext_out;
    ext_cmd->add_option("--in", ext_in, "CSI dataset")->required();
    ext_cmd->add_option("--out", ext_out, "micro-CSI output")->required();
    add_pipeline_flags(ext_cmd, ext_flags, false);

    // fingerprint
    auto* fp_cmd = app.add_subcommand("fingerprint", "build fingerprints per device");
    SharedFlags fp_flags;
    std::string fp_in, fp_out;
    fp_cmd->add_option("--in", fp_in, "CSI dataset")->required();
    fp_cmd->add_option("--out", fp_out, "fingerprint output")->required();
    add_pipeline_flags(fp_cmd, fp_flags);

    // enroll
    auto* en_cmd = app.add_subcommand("enroll", "build a fingerprint library");
    SharedFlags en_flags;
    std::string en_in, en_out, en_identity;
    en_cmd->add_option("--in", en_in, "CSI dataset of the enrolled device")->required();
    en_cmd->add_option("--identity", en_identity, "claimed device id")->required();
    en_cmd->add_option("--out", en_out, "library output")->required();
    add_pipeline_flags(en_cmd, en_flags);

    // auth
    auto* au_cmd = app.add_subcommand("auth", "authenticate a dataset against a library");
    SharedFlags au_flags;
    std::string au_lib, au_in, au_out;
    std::optional<double> au_threshold;
    double au_far = 0.0;
    au_cmd->add_option("--library", au_lib, "fingerprint library")->required();
    au_cmd->add_option("--in", au_in, "CSI dataset to authenticate")->required();
    au_cmd->add_option("--threshold", au_threshold,
                       "decision threshold (calibrated from the library when absent)");
    au_cmd->add_option("--far-target", au_far, "FAR target for calibration");
    au_cmd->add_option("--metric", au_flags.metric, "distance metric");
    au_cmd->add_option("--out", au_out, "decision output (JSONL)");
    add_pipeline_flags(au_cmd, au_flags);

    // evaluate
    auto* ev_cmd = app.add_subcommand("evaluate", "round-robin open-set evaluation");
    SharedFlags ev_flags;
    std::string ev_enroll, ev_test, ev_out;
    std::vector<int> ev_n_csi;
    std::vector<double> ev_far;
    ev_cmd->add_option("--enroll", ev_enroll, "enrollment dataset")->required();
    ev_cmd->add_option("--test", ev_test, "test dataset")->required();
    ev_cmd->add_option("--n-csi", ev_n_csi, "one or more pooling sizes");
    ev_cmd->add_option("--far-target", ev_far, "one or more FAR targets");
    ev_cmd->add_option("--metric", ev_flags.metric, "distance metric");
    ev_cmd->add_option("--out", ev_out, "machine-readable report (JSONL)");
    add_pipeline_flags(ev_cmd, ev_flags, false);

    // sweep
    auto* sw_cmd = app.add_subcommand("sweep", "ablation sweeps over pipeline axes");
    SharedFlags sw_flags;
    std::string sw_enroll, sw_test, sw_out;
    std::vector<int> sw_n_csi, sw_np;
    std::vector<double> sw_far;
    std::vector<std::string> sw_metrics, sw_oe, sw_fn;
    sw_cmd->add_option("--enroll", sw_enroll, "enrollment dataset")->required();
    sw_cmd->add_option("--test", sw_test, "test dataset")->required();
    sw_cmd->add_option("--n-csi", sw_n_csi, "pooling sizes");
    sw_cmd->add_option("--far-target", sw_far, "one or more FAR targets");
    sw_cmd->add_option("--metrics", sw_metrics, "metric names or 'all'");
    sw_cmd->add_option("--np-list", sw_np, "tap support values");
    sw_cmd->add_option("--oe", sw_oe, "on, off, or both");
    sw_cmd->add_option("--fn", sw_fn, "on, off, or both");
    sw_cmd->add_option("--out", sw_out, "machine-readable report (JSONL)");
    add_pipeline_flags(sw_cmd, sw_flags, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    OfdmGrid grid = OfdmGrid::legacy20();

    if (sim_cmd->parsed()) {
        Scenario sc;
        if (!sim_config.empty()) sc = read_scenario(sim_config);
        if (o_devices) sc.n_devices = *o_devices;
        if (o_packets) sc.n_packets = *o_packets;
        if (o_nrx) sc.n_rx = *o_nrx;
        if (o_npsim) sc.n_p_sim = *o_npsim;
        if (o_snr) sc.snr_db = *o_snr;
        if (o_imin) sc.intensity_min = *o_imin;
        if (o_imax) sc.intensity_max = *o_imax;
        if (o_c1) sc.case1_rate = *o_c1;
        if (o_c2) sc.case2_rate = *o_c2;
        if (o_speed) sc.speed_mps = *o_speed;
        if (o_seed) sc.seed = *o_seed;
        if (o_chseed) sc.channel_seed = *o_chseed;
        auto ms = generate_fleet(sc, grid);
        write_csi_dataset(sim_out, ms);
        std::fprintf(stderr, "wrote %zu measurements to %s\n", ms.size(), sim_out.c_str());
        return 0;
    }

    if (ext_cmd->parsed()) {
        auto ms = read_csi_dataset(ext_in);
        PipelineParams p = to_params(ext_flags);
        PartialDft pdft(grid, tap_index_set(p.n_p, grid.n_fft, grid.n_used()));
        int dropped = 0;
        auto stream = extract_stream(ms, pdft, p.eps_fade, &dropped);
        std::vector<MicroCsi> flat;
        for (auto& v : stream) {
            for (auto& mc : v) flat.push_back(std::move(mc));
        }
        write_micro_csi(ext_out, flat);
        std::fprintf(stderr, "extracted %zu micro-CSI vectors (%d measurements dropped)\n",
                     flat.size(), dropped);
        return 0;
    }

    if (fp_cmd->parsed()) {
        auto ms = read_csi_dataset(fp_in);
        PipelineParams p = to_params(fp_flags);
        PartialDft pdft(grid, tap_index_set(p.n_p, grid.n_fft, grid.n_used()));
        std::map<std::string, std::vector<CsiMeasurement>> by_dev;
        for (auto& m : ms) by_dev[m.device_id].push_back(std::move(m));
        std::vector<Fingerprint> fps;
        std::vector<std::string> notes;
        for (const auto& [id, dms] : by_dev) {
            auto stream = extract_stream(dms, pdft, p.eps_fade);
            auto dev_fps = fingerprints_from_stream(stream, fp_flags.n_csi, p, &notes, true);
            fps.insert(fps.end(), dev_fps.begin(), dev_fps.end());
        }
        write_fingerprints(fp_out, fps);
        for (const auto& n : notes) std::fprintf(stderr, "warning: %s\n", n.c_str());
        std::fprintf(stderr, "wrote %zu fingerprints to %s\n", fps.size(), fp_out.c_str());
        return 0;
    }

    if (en_cmd->parsed()) {
        auto all = read_csi_dataset(en_in);
        std::vector<CsiMeasurement> ms;
        for (auto& m : all) {
            if (m.device_id == en_identity) ms.push_back(std::move(m));
        }
        if (ms.empty()) {
            throw EvalError("dataset holds no measurements for " + en_identity);
        }
        auto lib = enroll(ms, en_identity, en_flags.n_csi, to_params(en_flags));
        write_library(en_out, lib);
        std::fprintf(stderr, "enrolled %s: S=%d, k=%d\n", lib.identity.c_str(),
                     lib.size(), lib.k);
        return 0;
    }

    if (au_cmd->parsed()) {
        auto lib = read_library(au_lib);
        auto ms = read_csi_dataset(au_in);
        PipelineParams p = to_params(au_flags);
        Metric metric = metric_from_string(au_flags.metric);
        PartialDft pdft(grid, tap_index_set(p.n_p, grid.n_fft, grid.n_used()));
        auto stream = extract_stream(ms, pdft, p.eps_fade);
        std::vector<std::string> notes;
        auto fps = fingerprints_from_stream(stream, au_flags.n_csi, p, &notes, true);
        for (const auto& n : notes) std::fprintf(stderr, "warning: %s\n", n.c_str());
        if (fps.empty()) throw EvalError("no test fingerprint could be built");

        double thr;
        if (au_threshold) {
            thr = *au_threshold;
        } else {
            const int s = lib.size();
            if (s < 2) throw EvalError("library too small to calibrate, pass --threshold");
            int n_hold = std::clamp(static_cast<int>(std::lround(0.2 * s)), 1, s - 1);
            FingerprintLibrary part;
            part.identity = lib.identity;
            part.fingerprints.assign(lib.fingerprints.begin(),
                                     lib.fingerprints.end() - n_hold);
            part.k = FingerprintLibrary::default_k(part.size());
            std::vector<double> scores;
            for (int i = s - n_hold; i < s; ++i) {
                scores.push_back(auth_distance(lib.fingerprints[i], part, metric));
            }
            thr = calibrate_threshold(scores, au_far);
        }

        std::ofstream out;
        if (!au_out.empty()) {
            out.open(au_out);
            if (!out) throw std::runtime_error("cannot write " + au_out);
        }
        int accepted = 0;
        for (std::size_t i = 0; i < fps.size(); ++i) {
            AuthDecision d = authenticate(fps[i], lib, thr, metric);
            accepted += d.accept ? 1 : 0;
            std::printf("fingerprint %zu from %s: distance=%.6g threshold=%.6g -> %s\n",
                        i, fps[i].device_claim.c_str(), d.distance, d.threshold,
                        d.accept ? "accept" : "reject");
            if (out) {
                out << "{\"index\":" << i << ",\"distance\":" << d.distance
                    << ",\"threshold\":" << d.threshold
                    << ",\"accept\":" << (d.accept ? "true" : "false") << "}\n";
            }
        }
        std::printf("accepted %d of %zu\n", accepted, fps.size());
        return 0;
    }

    auto run_eval = [&](const std::string& enroll_path, const std::string& test_path,
                        const SharedFlags& flags, const std::vector<int>& n_csi_list,
                        const std::vector<double>& far_targets) {
        EvalConfig cfg;
        cfg.pipeline = to_params(flags);
        cfg.metric = metric_from_string(flags.metric);
        cfg.n_csi_list = n_csi_list.empty() ? std::vector<int>{20} : n_csi_list;
        cfg.far_targets = parse_far_targets(far_targets);
        auto enroll_ms = read_csi_dataset(enroll_path);
        auto test_ms = read_csi_dataset(test_path);
        return std::tuple(cfg, std::move(enroll_ms), std::move(test_ms));
    };

    if (ev_cmd->parsed()) {
        auto [cfg, enroll_ms, test_ms] = run_eval(ev_enroll, ev_test, ev_flags,
                                                  ev_n_csi, ev_far);
        EvalReport rep = round_robin_eval(enroll_ms, test_ms, cfg);
        std::cout << rep.to_table();
        if (!ev_out.empty()) {
            std::ofstream out(ev_out);
            if (!out) throw std::runtime_error("cannot write " + ev_out);
            rep.write_jsonl(out);
        }
        return 0;
    }

    if (sw_cmd->parsed()) {
        auto [cfg, enroll_ms, test_ms] = run_eval(sw_enroll, sw_test, sw_flags,
                                                  sw_n_csi, sw_far);
        SweepAxes axes;
        for (const auto& m : sw_metrics) {
            if (m == "all") {
                axes.metrics = all_metrics();
                break;
            }
            axes.metrics.push_back(metric_from_string(m));
        }
        axes.n_p_list = sw_np;
        auto parse_onoff = [](const std::vector<std::string>& v, const char* what) {
            std::vector<bool> out;
            for (const auto& s : v) {
                if (s == "on") out.push_back(true);
                else if (s == "off") out.push_back(false);
                else if (s == "both") { out = {true, false}; break; }
                else throw std::invalid_argument(std::string(what) + ": want on/off/both");
            }
            return out;
        };
        axes.outlier_elimination = parse_onoff(sw_oe, "--oe");
        axes.normalize = parse_onoff(sw_fn, "--fn");

        auto results = ablation_sweep(enroll_ms, test_ms, cfg, axes);
        std::ofstream out;
        if (!sw_out.empty()) {
            out.open(sw_out);
            if (!out) throw std::runtime_error("cannot write " + sw_out);
        }
        for (const auto& r : results) {
            std::cout << "== " << r.label << " ==\n" << r.report.to_table() << "\n";
            if (out) {
                std::ostringstream tmp;
                r.report.write_jsonl(tmp);
                std::istringstream lines(tmp.str());
                std::string line;
                while (std::getline(lines, line)) {
                    out << "{\"sweep\":\"" << r.label << "\","
                        << line.substr(1) << "\n";
                }
            }
        }
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const microcsi::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const microcsi::EvalError& e) {
        std::fprintf(stderr, "evaluation error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
