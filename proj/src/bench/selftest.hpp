#pragma once

#include <iosfwd>
#include <string>

namespace covbench::bench {

// Reference-oracle self-tests for one task; prints one line per check.
// Returns false on any failure.
bool oracle_selftest(const std::string& task_id, std::ostream& os);

// Quick invariant suite across the numerical core; prints one line per
// check. Returns false on any failure.
bool invariant_selftest(std::ostream& os);

}  // namespace covbench::bench
