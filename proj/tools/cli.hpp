#pragma once

namespace pmc::cli {

/// Runs the `pmc` command line. Exit codes: 0 success, 1 internal error or
/// failed verification, 2 usage error, 3 invalid input.
int dispatch(int argc, char** argv);

}  // namespace pmc::cli
