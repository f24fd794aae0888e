#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "tadner/errors.hpp"

namespace tadner::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,      // unexpected failure
  kUsage = 2,         // bad arguments or a missing input path
  kConfig = 3,        // invalid configuration (InvalidConfig, FrozenEncoder)
  kData = 4,          // malformed or inconsistent input data
  kInsufficient = 5,  // InsufficientData, EmptySupport, MissingTypeInSupport
  kNumeric = 6,       // NonFiniteLoss, DegenerateDenominator
  kIo = 7,            // IoError
};

int exit_code_for(Errc code);

// Runs the `tadner` command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tadner::cli
