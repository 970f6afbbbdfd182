#pragma once

// Command-line front end: synth | featurize | train | predict | evaluate |
// report. Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
// error.

namespace pathwatch {

int run_cli(int argc, const char* const* argv);

}  // namespace pathwatch
