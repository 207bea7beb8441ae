#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "microcsi/extract.hpp"
#include "microcsi/matcher.hpp"
#include "microcsi/sim.hpp"

namespace microcsi {

// line is 1-based; 0 means the problem is not tied to a line (missing file,
// bad header).
struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_, const std::string& reason)
        : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + reason
                                       : reason),
          line(line_) {}
};

struct DimensionError : ParseError {
    DimensionError(int line_, const std::string& reason) : ParseError(line_, reason) {}
};

// CSI datasets: one record per line,
// {"device_id":..,"packet_index":..,"n_rx":..,"chains":[[[re,im]x52],..],
//  "snr_db":..,"flags":[..]}
// snr_db and flags are optional; all values must be finite. Read and write
// round-trip bit-exactly.
std::vector<CsiMeasurement> read_csi_dataset(const std::string& path);
std::vector<CsiMeasurement> read_csi_dataset(std::istream& in);
void write_csi_dataset(const std::string& path, const std::vector<CsiMeasurement>& ms);
void write_csi_dataset(std::ostream& out, const std::vector<CsiMeasurement>& ms);

// Fingerprint libraries: a header line
// {"format":"microcsi-library","version":1,"identity":..,"s":..,"k":..}
// followed by one fingerprint record per line.
FingerprintLibrary read_library(const std::string& path);
void write_library(const std::string& path, const FingerprintLibrary& lib);

// Bare fingerprint lists (header {"format":"microcsi-fingerprints",..}).
std::vector<Fingerprint> read_fingerprints(const std::string& path);
void write_fingerprints(const std::string& path, const std::vector<Fingerprint>& fps);

// Extracted micro-CSI lists (header {"format":"microcsi-micro",..}).
std::vector<MicroCsi> read_micro_csi(const std::string& path);
void write_micro_csi(const std::string& path, const std::vector<MicroCsi>& mcs);

// Simulation scenario: a single JSON object; every field optional, unknown
// keys rejected.
Scenario read_scenario(const std::string& path);

} // namespace microcsi
