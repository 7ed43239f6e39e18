#pragma once

// Point cloud files and dataset manifests.
//
// XYZ: one point per line, three whitespace-separated decimal reals; blank
// lines are ignored. Written with 17 significant digits and LF endings.
//
// PLY (ascii subset): "ply", "format ascii 1.0", one "element vertex N",
// exactly the properties x, y, z (float or double), "end_header", then N
// vertex lines. Comment lines in the header are skipped.
//
// Manifest: one pair per line, "<input> <target> <source> <category>", with
// paths relative to the manifest's directory.

#include "crn/geometry.hpp"
#include "crn/selfsup.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace crn {

enum class CloudFormat { Xyz, Ply };

// Format from the extension (".ply" -> PLY, anything else XYZ).
CloudFormat format_for_path(const std::filesystem::path& path);

PointCloud parse_cloud(std::string_view text, CloudFormat format);
std::string format_cloud(const PointCloud& cloud, CloudFormat format);

PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// Writes input/target clouds as XYZ files plus manifest.txt into `dir`.
void write_dataset(const std::filesystem::path& dir, const std::vector<TrainingPair>& pairs);
std::vector<TrainingPair> read_manifest(const std::filesystem::path& manifest);

std::string format_real(double value);

}  // namespace crn
