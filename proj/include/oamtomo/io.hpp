#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "oamtomo/entanglement.hpp"
#include "oamtomo/oam_optics.hpp"
#include "oamtomo/qutrit.hpp"
#include "oamtomo/tomography.hpp"

namespace oamtomo {

// Density matrix JSON: {"dim": 9, "re": [...], "im": [...]} with both
// arrays row-major and 81 entries long. Values are written with enough
// digits that write -> read -> write reproduces identical bytes.
void write_density_matrix(const DensityMatrix9& rho, std::ostream& out);
void write_density_matrix(const DensityMatrix9& rho, const std::filesystem::path& path);
DensityMatrix9 read_density_matrix(std::istream& in);
DensityMatrix9 read_density_matrix(const std::filesystem::path& path);

// Counts CSV: header "i,j,counts" followed by the 81 settings in
// row-major order. The metadata sidecar is JSON with keys duration_s,
// total_trials, background_per_setting.
void write_counts_csv(const CoincidenceTable& table, std::ostream& out);
void write_counts_metadata(const CoincidenceTable& table, std::ostream& out);
void write_counts(const CoincidenceTable& table, const std::filesystem::path& csv_path,
                  const std::filesystem::path& metadata_path);

// Reads counts alone (metadata fields left at their defaults) or
// counts plus sidecar. Each (i, j) pair must appear exactly once.
CoincidenceTable read_counts_csv(std::istream& in);
void read_counts_metadata(std::istream& in, CoincidenceTable& table);
CoincidenceTable read_counts(const std::filesystem::path& csv_path);
CoincidenceTable read_counts(const std::filesystem::path& csv_path,
                             const std::filesystem::path& metadata_path);

// Witness report JSON: alpha, beta, fidelity, witness, certified,
// ci_low, ci_high (the interval keys are null when no interval was
// computed).
void write_witness_report(const WitnessReport& report, std::ostream& out);
void write_witness_report(const WitnessReport& report, const std::filesystem::path& path);
WitnessReport read_witness_report(std::istream& in);
WitnessReport read_witness_report(const std::filesystem::path& path);

// Scan CSV: header "s,gaussian_component".
void write_scan_csv(const std::vector<ScanPoint>& scan, std::ostream& out);
void write_scan_csv(const std::vector<ScanPoint>& scan, const std::filesystem::path& path);
std::vector<ScanPoint> read_scan_csv(std::istream& in);
std::vector<ScanPoint> read_scan_csv(const std::filesystem::path& path);

// Field map CSV: header "x,y,intensity,phase" sampled on the
// quadrature grid sized by ref_w0.
void write_field_map_csv(const Field& field, double ref_w0,
                         const QuadratureGrid& grid, std::ostream& out);

}  // namespace oamtomo
