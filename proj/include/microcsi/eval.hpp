#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "microcsi/extract.hpp"
#include "microcsi/fingerprint.hpp"
#include "microcsi/matcher.hpp"

namespace microcsi {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pipeline parameters shared by enrollment and evaluation.
struct PipelineParams {
    int n_p = 8;
    double omega1 = kOmega1;
    double omega2 = kOmega2;
    double eps_fade = 1e-3;
    bool outlier_elimination = true;
    bool normalize = true;
};

struct EvalConfig {
    PipelineParams pipeline;
    std::vector<int> n_csi_list{20};
    Metric metric = Metric::manhattan;
    std::vector<double> far_targets{0.0};
    double calibration_holdout = 0.2;   // library share held out for thresholds
};

// One operating point of one legitimate device. adr/far are absent when the
// corresponding test category is empty.
struct EvalRow {
    std::string device_id;   // "average" in aggregate rows
    int n_csi = 0;
    Metric metric = Metric::manhattan;
    double far_target = 0.0;
    std::optional<double> adr;
    std::optional<double> far;
    int n_tests = 0;
    double threshold = 0.0;
    std::vector<std::string> notes;
};

struct EvalReport {
    std::vector<EvalRow> rows;       // per device, sorted by (device, n_csi)
    std::vector<EvalRow> averages;   // one per (n_csi, metric, far_target)

    std::string to_table() const;
    void write_jsonl(std::ostream& out) const;
};

struct AdrFar {
    std::optional<double> adr;
    std::optional<double> far;
    int n_impostors = 0;
    int n_legit = 0;
};

// adr = rejected impostors / impostors, far = rejected legitimates /
// legitimates; truth marks legitimate decisions. Zero-denominator categories
// stay absent.
AdrFar compute_adr_far(const std::vector<AuthDecision>& decisions,
                       const std::vector<bool>& truth);

// Extraction of a whole measurement stream; entries that fail the deep-fade
// check are dropped (their count is reported via dropped).
std::vector<std::vector<MicroCsi>> extract_stream(
    const std::vector<CsiMeasurement>& ms, const PartialDft& pdft,
    double eps_fade, int* dropped = nullptr);

// Consecutive groups of n_csi measurements -> one fingerprint per group.
// Groups that come out constant are skipped (noted in *notes). With
// skip_empty, groups whose members are all filtered out are skipped too
// instead of raising EmptyBatchError.
std::vector<Fingerprint> fingerprints_from_stream(
    const std::vector<std::vector<MicroCsi>>& stream, int n_csi,
    const PipelineParams& p, std::vector<std::string>* notes = nullptr,
    bool skip_empty = false);

// Builds the claimed identity's library: S = floor(usable / n_csi)
// fingerprints, k = round(sqrt(S)).
FingerprintLibrary enroll(const std::vector<CsiMeasurement>& measurements,
                          const std::string& identity, int n_csi,
                          const PipelineParams& params);

// Each device takes the legitimate role in turn and is attacked by every
// other device's test fingerprints. Thresholds come from an 80/20 split of
// the enrollment library; the full library is rebuilt before testing.
EvalReport round_robin_eval(const std::vector<CsiMeasurement>& dataset_enroll,
                            const std::vector<CsiMeasurement>& dataset_test,
                            const EvalConfig& config);

// One round-robin evaluation per combination of the given axes.
struct SweepAxes {
    std::vector<Metric> metrics;
    std::vector<int> n_p_list;
    std::vector<bool> outlier_elimination;
    std::vector<bool> normalize;
};

struct SweepResult {
    std::string label;   // e.g. "np=8 oe=on fn=on metric=manhattan"
    EvalConfig config;
    EvalReport report;
};

std::vector<SweepResult> ablation_sweep(const std::vector<CsiMeasurement>& dataset_enroll,
                                        const std::vector<CsiMeasurement>& dataset_test,
                                        const EvalConfig& base, const SweepAxes& axes);

} // namespace microcsi
