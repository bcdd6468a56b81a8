#pragma once

#include <string>
#include <vector>

#include "rezero/config.hpp"
#include "rezero/isometry.hpp"
#include "rezero/toy.hpp"
#include "rezero/train.hpp"

namespace rezero {

// All numbers are written with 17 significant digits so a re-import is
// bit-exact. Unwritable or unreadable paths raise IoError.
//
// A RunLog at PATH is three files:
//   PATH            iteration,loss,lr
//   PATH.alpha.csv  epoch,alpha_0,...,alpha_{L-1}
//   PATH.meta       key = value: config snapshot, metric.<name>, diverged
void write_runlog(const std::string& path, const RunLog& log);
RunLog read_runlog(const std::string& path);

/// Epoch x gate matrix of |alpha|, the heat-map data.
void write_alpha_matrix(const std::string& path, const std::vector<std::vector<double>>& alpha);
std::vector<std::vector<double>> read_alpha_matrix(const std::string& path);

// Structured text (JSON) documents. NaN is written as null.
void write_spectrum(const std::string& path, const SpectrumResult& s, const KeyValues& meta = {});
SpectrumResult read_spectrum(const std::string& path);

void write_grid(const std::string& path, const toy::ContourGrid<double>& grid);
toy::ContourGrid<double> read_grid(const std::string& path);

/// step,w,alpha,loss per line.
void write_trajectory(const std::string& path, const toy::Trajectory<double>& t);
toy::Trajectory<double> read_trajectory(const std::string& path);

}  // namespace rezero
