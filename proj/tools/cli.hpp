// SPDX-License-Identifier: Apache-2.0
//
// `mvse` subcommands: synth, train, embed, eval, vip, pdp. Every command
// writes `<output>.manifest` next to its main output.
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvse/encoders.hpp"
#include "mvse/probes.hpp"
#include "mvse/record.hpp"

namespace mvse::cli {

/// Runs the tool; returns the process exit code. Errors go to stderr.
int run(int argc, char** argv);
/// Convenience overload for tests: args exclude the program name.
int run(const std::vector<std::string>& args);

enum class FeatureKind { Raw, Embedding };

/// Probe together with how its feature matrix is built.
struct ProbeFile {
  ProbeModel model;
  FeatureKind features = FeatureKind::Raw;
  std::string label;
  std::vector<std::string> covariates;
};

void save_probe(const std::filesystem::path& path, const ProbeFile& probe);
ProbeFile load_probe(const std::filesystem::path& path);

/// Feature matrix with group "location" ((lon, lat) or e_1..e_d) followed by
/// the named aux covariates, each in its own group.
FeatureMatrix build_features(std::span<const LocationRecord> records, FeatureKind kind,
                             const MultiViewModel* model, std::span<const std::string> covariates);

}  // namespace mvse::cli
