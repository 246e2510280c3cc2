#pragma once

#include <filesystem>
#include <string>

#include "frametwin/synth.hpp"

namespace frametwin {

// Thrown for malformed or unreadable files; maps to the validation exit code.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WireframeFile {
    WireframeGraph graph;
    int degree = 3;
    std::string units = "mm";
};

WireframeFile read_wireframe(const std::filesystem::path& path);
void write_wireframe(const std::filesystem::path& path, const WireframeGraph& graph,
                     int degree = 3, const std::string& units = "mm");

std::vector<Camera> read_cameras(const std::filesystem::path& path);
void write_cameras(const std::filesystem::path& path, const std::vector<Camera>& cams);

PrintPlan read_plan(const std::filesystem::path& path);
void write_plan(const std::filesystem::path& path, const PrintPlan& plan);

DigitalTwin read_twin(const std::filesystem::path& path, int degree = 3);
void write_twin(const std::filesystem::path& path, const DigitalTwin& twin);

/// 8-bit binary PGM (P5, maxval 255); intensities round half-up from [0,1].
void write_pgm(const std::filesystem::path& path, const ImageF& img);
ImageF read_pgm(const std::filesystem::path& path);

void write_trace_csv(const std::filesystem::path& path,
                     const std::vector<LossBreakdown>& trace);
std::vector<LossBreakdown> read_trace_csv(const std::filesystem::path& path);

/// Flat little-endian f64 parameter dump plus a JSON sidecar describing
/// layer shapes, the encoding config, and the seed.
void write_checkpoint(const std::filesystem::path& bin_path,
                      const std::filesystem::path& json_path,
                      const MlpParams& field, std::uint64_t seed);
MlpParams read_checkpoint(const std::filesystem::path& bin_path,
                          const std::filesystem::path& json_path,
                          std::uint64_t* seed = nullptr);

void write_report(const std::filesystem::path& path, const RunReport& report);

/// Stable hex digest of a configuration string, for run manifests.
std::string config_hash(const std::string& canonical);

}  // namespace frametwin
