#pragma once

#include <functional>
#include <string>
#include <vector>

namespace acceptance {

struct CheckLine {
  std::string id;  // "1".."9"; "6*" and "7*" are supplementary lines
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

struct Options {
  std::vector<std::string> only;  // empty: every check
  std::string data_dir;           // if set, diagram CSVs of the traced branches are written here
  std::function<void(const CheckLine&)> on_line;
};

std::vector<CheckLine> run_acceptance(const Options& opt);
std::string format_line(const CheckLine& line);

// Mass at which Model I d=1 has a stable constant and a stable plateau, found on the first run.
extern const double kCoexistenceMass;

}  // namespace acceptance
