// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: run configuration, subcommand dispatch and report
// emission with a run manifest.

#pragma once

#include "risplan/calibration.hpp"
#include "risplan/placement.hpp"

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace risplan {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1, // unexpected internal error
    kExitUsage = 2,   // unknown subcommand or bad flags
    kExitConfig = 3,  // unreadable config or input file
    kExitInvariant = 4,
    kExitIo = 5,      // output could not be written
};

struct RunConfig {
    std::filesystem::path scene_path;
    std::filesystem::path network_path;
    std::string system = "5G";
    std::filesystem::path output_dir = "out";

    // [grid]
    double tile_size = 2.0;
    double ue_height = 1.5;
    int samples_per_tile = 1;

    TraceConfig trace;

    // [coverage]
    DiffuseMode diffuse = DiffuseMode::ScatteringFaces;
    double scatter_patch_m = 4.0;

    PipelineConfig pipeline;
    std::vector<double> aperture_sizes{2.0, 4.0, 8.0, 11.24};

    // [calibration]
    std::filesystem::path measurements_path;
    GeoReference geo;
    CalibrationConfig calibration;

    /// Parses `key = value` lines grouped in [sections]; relative paths are
    /// resolved against `base_dir`. Throws ParseError on unknown keys or bad values.
    static RunConfig parse(std::istream& in, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);

    /// Range checks plus existence of the referenced input files.
    void validate(bool need_measurements) const;
    nlohmann::json to_json() const;
};

/// Runs one command line (program name first). Diagnostics go to `err` as a
/// single line; the return value is one of ExitCode.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace risplan
