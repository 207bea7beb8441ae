#include "microcsi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace microcsi {

using json = nlohmann::json;

AdrFar compute_adr_far(const std::vector<AuthDecision>& decisions,
                       const std::vector<bool>& truth) {
    if (decisions.size() != truth.size()) {
        throw std::invalid_argument("decisions/truth length mismatch");
    }
    AdrFar r;
    int rejected_impostors = 0;
    int rejected_legit = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (truth[i]) {
            ++r.n_legit;
            if (!decisions[i].accept) ++rejected_legit;
        } else {
            ++r.n_impostors;
            if (!decisions[i].accept) ++rejected_impostors;
        }
    }
    if (r.n_impostors > 0) r.adr = static_cast<double>(rejected_impostors) / r.n_impostors;
    if (r.n_legit > 0) r.far = static_cast<double>(rejected_legit) / r.n_legit;
    return r;
}

std::vector<std::vector<MicroCsi>> extract_stream(
    const std::vector<CsiMeasurement>& ms, const PartialDft& pdft,
    double eps_fade, int* dropped) {
    std::vector<std::vector<MicroCsi>> stream;
    stream.reserve(ms.size());
    int n_dropped = 0;
    for (const auto& m : ms) {
        try {
            stream.push_back(extract_micro_csi(m, pdft, eps_fade));
        } catch (const DeepFadeError&) {
            ++n_dropped;
        }
    }
    if (dropped) *dropped = n_dropped;
    return stream;
}

std::vector<Fingerprint> fingerprints_from_stream(
    const std::vector<std::vector<MicroCsi>>& stream, int n_csi,
    const PipelineParams& p, std::vector<std::string>* notes, bool skip_empty) {
    if (n_csi < 1) throw std::invalid_argument("n_csi must be >= 1");
    FingerprintOptions opts{p.outlier_elimination, p.normalize};
    std::vector<Fingerprint> fps;
    const int s = static_cast<int>(stream.size()) / n_csi;
    fps.reserve(s);
    for (int g = 0; g < s; ++g) {
        std::vector<MicroCsi> pooled;
        for (int i = g * n_csi; i < (g + 1) * n_csi; ++i) {
            pooled.insert(pooled.end(), stream[i].begin(), stream[i].end());
        }
        try {
            fps.push_back(construct_fingerprint(pooled, p.omega1, p.omega2, opts));
        } catch (const ConstantFingerprintError&) {
            if (notes) {
                notes->push_back("group " + std::to_string(g) +
                                 " skipped: constant fingerprint");
            }
        } catch (const EmptyBatchError&) {
            if (!skip_empty) throw;
            if (notes) {
                notes->push_back("group " + std::to_string(g) +
                                 " skipped: every member filtered");
            }
        }
    }
    return fps;
}

namespace {

PartialDft pipeline_pdft(const PipelineParams& p) {
    OfdmGrid grid = OfdmGrid::legacy20();
    return PartialDft(grid, tap_index_set(p.n_p, grid.n_fft, grid.n_used()));
}

std::map<std::string, std::vector<CsiMeasurement>> group_by_device(
    const std::vector<CsiMeasurement>& ms) {
    std::map<std::string, std::vector<CsiMeasurement>> g;
    for (const auto& m : ms) g[m.device_id].push_back(m);
    return g;
}

} // namespace

FingerprintLibrary enroll(const std::vector<CsiMeasurement>& measurements,
                          const std::string& identity, int n_csi,
                          const PipelineParams& params) {
    if (n_csi < 1) throw std::invalid_argument("n_csi must be >= 1");
    for (const auto& m : measurements) {
        if (m.device_id != identity) {
            throw EvalError("measurement claims '" + m.device_id +
                            "', enrolling '" + identity + "'");
        }
    }
    if (static_cast<int>(measurements.size()) < n_csi) {
        throw EvalError("insufficient data: " + std::to_string(measurements.size()) +
                        " measurements for n_csi=" + std::to_string(n_csi));
    }
    PartialDft pdft = pipeline_pdft(params);
    auto stream = extract_stream(measurements, pdft, params.eps_fade);
    auto fps = fingerprints_from_stream(stream, n_csi, params);
    if (fps.empty()) throw EvalError("insufficient data: no fingerprint group survived");

    FingerprintLibrary lib;
    lib.identity = identity;
    lib.fingerprints = std::move(fps);
    lib.k = FingerprintLibrary::default_k(lib.size());
    return lib;
}

EvalReport round_robin_eval(const std::vector<CsiMeasurement>& dataset_enroll,
                            const std::vector<CsiMeasurement>& dataset_test,
                            const EvalConfig& config) {
    auto by_dev_enroll = group_by_device(dataset_enroll);
    auto by_dev_test = group_by_device(dataset_test);
    if (by_dev_enroll.empty()) throw EvalError("enrollment dataset is empty");
    {
        std::vector<std::string> e, t;
        for (const auto& [id, _] : by_dev_enroll) e.push_back(id);
        for (const auto& [id, _] : by_dev_test) t.push_back(id);
        if (e != t) throw EvalError("enroll/test device sets differ");
    }
    if (!(config.calibration_holdout > 0.0) || config.calibration_holdout >= 1.0) {
        throw EvalError("calibration holdout must be in (0, 1)");
    }

    PartialDft pdft = pipeline_pdft(config.pipeline);

    std::map<std::string, std::vector<std::vector<MicroCsi>>> xe, xt;
    std::map<std::string, int> dropped_enroll, dropped_test;
    for (const auto& [id, ms] : by_dev_enroll) {
        xe[id] = extract_stream(ms, pdft, config.pipeline.eps_fade, &dropped_enroll[id]);
    }
    for (const auto& [id, ms] : by_dev_test) {
        xt[id] = extract_stream(ms, pdft, config.pipeline.eps_fade, &dropped_test[id]);
    }

    EvalReport rep;
    for (int n_csi : config.n_csi_list) {
        std::map<std::string, std::vector<Fingerprint>> lib_fps, test_fps;
        std::map<std::string, std::vector<std::string>> build_notes;
        for (const auto& [id, stream] : xe) {
            lib_fps[id] = fingerprints_from_stream(stream, n_csi, config.pipeline,
                                                   &build_notes[id], true);
            test_fps[id] = fingerprints_from_stream(xt.at(id), n_csi, config.pipeline,
                                                    &build_notes[id], true);
        }

        for (const auto& [legit, fps] : lib_fps) {
            const int s = static_cast<int>(fps.size());
            if (s < 2) {
                throw EvalError("device " + legit + " yields only " + std::to_string(s) +
                                " library fingerprints at n_csi=" + std::to_string(n_csi) +
                                "; need >= 2 for calibration");
            }
            int n_hold = std::clamp(
                static_cast<int>(std::lround(config.calibration_holdout * s)), 1, s - 1);
            int n_kept = s - n_hold;

            FingerprintLibrary part;
            part.identity = legit;
            part.fingerprints.assign(fps.begin(), fps.begin() + n_kept);
            part.k = FingerprintLibrary::default_k(n_kept);
            std::vector<double> cal_scores;
            cal_scores.reserve(n_hold);
            for (int i = n_kept; i < s; ++i) {
                cal_scores.push_back(auth_distance(fps[i], part, config.metric));
            }

            FingerprintLibrary full;
            full.identity = legit;
            full.fingerprints = fps;
            full.k = FingerprintLibrary::default_k(s);

            // distances are threshold-independent; compute once per device
            std::map<std::string, std::vector<double>> dists;
            for (const auto& [id, tfps] : test_fps) {
                auto& d = dists[id];
                d.reserve(tfps.size());
                for (const auto& fp : tfps) {
                    d.push_back(auth_distance(fp, full, config.metric));
                }
            }

            for (double target : config.far_targets) {
                double thr = calibrate_threshold(cal_scores, target);
                EvalRow row;
                row.device_id = legit;
                row.n_csi = n_csi;
                row.metric = config.metric;
                row.far_target = target;
                row.threshold = thr;

                int legit_total = 0, legit_rejected = 0;
                int imp_total = 0, imp_rejected = 0;
                for (const auto& [id, d] : dists) {
                    int rej = 0;
                    for (double v : d) {
                        if (v > thr) ++rej;
                    }
                    if (id == legit) {
                        legit_total += static_cast<int>(d.size());
                        legit_rejected += rej;
                    } else {
                        imp_total += static_cast<int>(d.size());
                        imp_rejected += rej;
                        double per_dev = d.empty() ? 1.0
                                                   : static_cast<double>(rej) / d.size();
                        if (per_dev < 0.5) {
                            char buf[96];
                            std::snprintf(buf, sizeof(buf),
                                          "weak separation vs %s (adr=%.3f)", id.c_str(),
                                          per_dev);
                            row.notes.push_back(buf);
                        }
                    }
                }
                row.n_tests = legit_total + imp_total;
                if (imp_total > 0) row.adr = static_cast<double>(imp_rejected) / imp_total;
                if (legit_total > 0) row.far = static_cast<double>(legit_rejected) / legit_total;

                if (dropped_enroll[legit] > 0 || dropped_test[legit] > 0) {
                    row.notes.push_back(
                        "deep-fade drops: " + std::to_string(dropped_enroll[legit]) +
                        " enroll, " + std::to_string(dropped_test[legit]) + " test");
                }
                for (const auto& n : build_notes[legit]) row.notes.push_back(n);
                rep.rows.push_back(std::move(row));
            }
        }

        for (double target : config.far_targets) {
            EvalRow avg;
            avg.device_id = "average";
            avg.n_csi = n_csi;
            avg.metric = config.metric;
            avg.far_target = target;
            double adr_sum = 0, far_sum = 0, thr_sum = 0;
            int adr_n = 0, far_n = 0, n = 0;
            for (const auto& row : rep.rows) {
                if (row.n_csi != n_csi || row.far_target != target) continue;
                ++n;
                thr_sum += row.threshold;
                avg.n_tests += row.n_tests;
                if (row.adr) {
                    adr_sum += *row.adr;
                    ++adr_n;
                }
                if (row.far) {
                    far_sum += *row.far;
                    ++far_n;
                }
            }
            if (n > 0) avg.threshold = thr_sum / n;
            if (adr_n > 0) avg.adr = adr_sum / adr_n;
            if (far_n > 0) avg.far = far_sum / far_n;
            rep.averages.push_back(std::move(avg));
        }
    }
    return rep;
}

namespace {

std::string row_to_line(const EvalRow& r) {
    char buf[160];
    auto fmt = [](const std::optional<double>& v) {
        char b[16];
        if (!v) return std::string("      -");
        std::snprintf(b, sizeof(b), "%7.4f", *v);
        return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "%-10s %6d  %-15s %10.4f  %s  %s  %8d  %12.6g",
                  r.device_id.c_str(), r.n_csi, metric_name(r.metric).c_str(),
                  r.far_target, fmt(r.adr).c_str(), fmt(r.far).c_str(), r.n_tests,
                  r.threshold);
    std::string line = buf;
    if (!r.notes.empty()) {
        line += "  [";
        for (std::size_t i = 0; i < r.notes.size(); ++i) {
            if (i) line += "; ";
            line += r.notes[i];
        }
        line += "]";
    }
    return line;
}

} // namespace

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << "device      n_csi  metric           far_target      adr      far   n_tests     threshold\n";
    for (const auto& r : rows) os << row_to_line(r) << '\n';
    for (const auto& r : averages) os << row_to_line(r) << '\n';
    return os.str();
}

void EvalReport::write_jsonl(std::ostream& out) const {
    auto dump = [&out](const EvalRow& r, const char* kind) {
        json j;
        j["kind"] = kind;
        j["device_id"] = r.device_id;
        j["n_csi"] = r.n_csi;
        j["metric"] = metric_name(r.metric);
        j["far_target"] = r.far_target;
        if (r.adr) j["adr"] = *r.adr;
        if (r.far) j["far"] = *r.far;
        j["n_tests"] = r.n_tests;
        j["threshold"] = r.threshold;
        if (!r.notes.empty()) j["notes"] = r.notes;
        out << j.dump() << '\n';
    };
    for (const auto& r : rows) dump(r, "device");
    for (const auto& r : averages) dump(r, "average");
}

std::vector<SweepResult> ablation_sweep(const std::vector<CsiMeasurement>& dataset_enroll,
                                        const std::vector<CsiMeasurement>& dataset_test,
                                        const EvalConfig& base, const SweepAxes& axes) {
    auto metrics = axes.metrics.empty() ? std::vector<Metric>{base.metric} : axes.metrics;
    auto nps = axes.n_p_list.empty() ? std::vector<int>{base.pipeline.n_p} : axes.n_p_list;
    auto oes = axes.outlier_elimination.empty()
                   ? std::vector<bool>{base.pipeline.outlier_elimination}
                   : axes.outlier_elimination;
    auto fns = axes.normalize.empty() ? std::vector<bool>{base.pipeline.normalize}
                                      : axes.normalize;

    std::vector<SweepResult> out;
    for (int np : nps) {
        for (bool oe : oes) {
            for (bool fn : fns) {
                for (Metric m : metrics) {
                    SweepResult r;
                    r.config = base;
                    r.config.pipeline.n_p = np;
                    r.config.pipeline.outlier_elimination = oe;
                    r.config.pipeline.normalize = fn;
                    r.config.metric = m;
                    r.label = "np=" + std::to_string(np) +
                              " oe=" + (oe ? "on" : "off") +
                              " fn=" + (fn ? "on" : "off") + " metric=" + metric_name(m);
                    r.report = round_robin_eval(dataset_enroll, dataset_test, r.config);
                    out.push_back(std::move(r));
                }
            }
        }
    }
    return out;
}

} // namespace microcsi
