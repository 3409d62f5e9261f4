#pragma once

namespace ghnforge {

// Entry point behind the ghnforge binary. Exit codes: 0 ok, 2 config error,
// 3 numeric failure, 4 io error, 1 unexpected. GHNFORGE_SEED overrides the
// active command's seed.
int cli_run(int argc, const char* const* argv);

}  // namespace ghnforge
