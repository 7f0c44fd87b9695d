#pragma once

namespace dclogit::cli {

// Process exit codes, stable across releases:
//   0 success
//   2 bad usage (unknown flags, missing required arguments)
//   3 file could not be read or written
//   4 input failed validation
//   5 estimation stopped without meeting the convergence criteria
//   6 feebate solver could not balance revenue
//   7 internal numeric or logic failure
enum ExitCode {
    kOk = 0,
    kUsage = 2,
    kIo = 3,
    kValidation = 4,
    kEstimateNotConverged = 5,
    kFeebateNotConverged = 6,
    kInternal = 7,
};

int run(int argc, char** argv);

} // namespace dclogit::cli
