#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "vse/geo.hpp"
#include "vse/grid.hpp"
#include "vse/inference.hpp"

namespace vse {

/// Malformed input; the message carries "source:line: ".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// ESRI ASCII grid. The file lists the top row first; GridSpec rows count
// upward, so rows are flipped on the way in and out.
RasterGrid read_ascii_grid(std::istream& in, const std::string& source = "<stream>");
RasterGrid read_ascii_grid(const std::filesystem::path& path);
void write_ascii_grid(const RasterGrid& grid, std::ostream& out);
void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path);

// Roads: GeoJSON (FeatureCollection, Feature or bare geometry of
// LineString / MultiLineString) or CSV rows polyline_id,vertex_index,x,y.
RoadNetwork read_roads_geojson(std::istream& in, const std::string& source = "<stream>");
RoadNetwork read_roads_csv(std::istream& in, const std::string& source = "<stream>");
/// Picks the reader from the extension (.csv, otherwise GeoJSON).
RoadNetwork read_roads(const std::filesystem::path& path);
void write_roads_geojson(const RoadNetwork& roads, std::ostream& out);
void write_roads_csv(const RoadNetwork& roads, std::ostream& out);

/// Points as CSV with columns x and y. A header row is optional; with one,
/// the x and y columns may sit anywhere.
std::vector<Point> read_points_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<Point> read_points(const std::filesystem::path& path);
void write_points_csv(std::span<const Point> points, std::ostream& out);

/// Everything needed to rebuild a fit from the original inputs.
struct SavedFit {
  ModelSpec spec;
  MeshConfig mesh;
  bool mean_correction = true;
  std::uint64_t seed = 1;
  HyperGrid grid;
  std::vector<HyperNode> nodes;
  std::vector<Vector> modes;
  std::vector<ParameterSummary> summaries;
  std::optional<ModelScores> scores;
};

/// Fit summary as JSON: parameter table (mean, sd, 0.025q, 0.5q, 0.975q),
/// criteria, and the hyper grid with per-node latent modes so the fit can
/// be restored by rebuild_fit. `extra` is merged in at the top level.
std::string fit_to_json(const FitResult& fit, const MeshConfig& mesh, bool mean_correction,
                        const std::string& extra_json = "{}");
SavedFit fit_from_json(const std::string& text, const std::string& source = "<stream>");

/// Parameter table as CSV.
void write_summary_csv(std::span<const ParameterSummary> summaries, std::ostream& out);

struct NamedScores {
  std::string model;
  ModelScores scores;
};
/// model,dic,p_d,waic,p_waic,lpml,unreliable_cpo
void write_comparison_csv(std::span<const NamedScores> rows, std::ostream& out);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace vse
