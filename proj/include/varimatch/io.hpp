#pragma once

#include "varimatch/config.hpp"
#include "varimatch/shooting.hpp"
#include "varimatch/varifold.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace varimatch {

/// 17-significant-digit decimal rendering; guarantees double round-trip.
std::string format_double(double v);

/// varifold-v1 JSON schema:
/// {"format":"varifold-v1","n":int,"d":int,"atoms":[{"x":[...],"U":[[...] x d]}]}
DiscreteVarifold read_varifold(const std::filesystem::path& path);
DiscreteVarifold read_varifold_stream(std::istream& in, const std::string& name);
void write_varifold(const DiscreteVarifold& mu, const std::filesystem::path& path);
std::string varifold_to_json(const DiscreteVarifold& mu);

/// Trajectory JSON: {"n":..,"d":..,"atoms":..,"steps":S,
///                   "states":[{"t":..,"q":[...],"p":[...]}, ...]}
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory read_trajectory(const std::filesystem::path& path);

/// Run configuration JSON with keys sigma_rho, gamma:{kind,sigma_g?}, sigma_v,
/// lambda, steps, optimizer:{memory,max_iters,grad_tol}, reduce_momentum,
/// seed. All keys optional with documented defaults; unknown keys and invalid
/// values are errors naming the offending key.
RunConfig read_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& name);

/// One Dirac per mesh cell: triangles of a Wavefront OBJ become 2-varifold
/// atoms (centroid position, edge frame scaled so the weight equals the
/// triangle area); CSV polylines (one "x,y,..." vertex per line, components
/// separated by blank lines) become 1-varifold atoms per segment.
DiscreteVarifold mesh_to_varifold(const std::filesystem::path& path);
DiscreteVarifold obj_to_varifold(std::istream& in, const std::string& name);
DiscreteVarifold csv_polyline_to_varifold(std::istream& in, const std::string& name);

} // namespace varimatch
