#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "covbench.h"

namespace fs = std::filesystem;

TEST_CASE("session lifecycle and error reporting") {
  cb_session* s = cb_session_new();
  REQUIRE(s != nullptr);
  CHECK(std::strlen(cb_last_error(s)) == 0);
  CHECK(std::strlen(cb_version()) > 0);

  // missing config file -> config error with a message
  CHECK(cb_run(s, "/nonexistent/config.toml", "/tmp/covbench_capi_out", 0, 1) == CB_ERR_CONFIG);
  CHECK(std::strlen(cb_last_error(s)) > 0);

  // null arguments
  CHECK(cb_run(s, nullptr, "/tmp/x", 0, 1) == CB_ERR_CONFIG);
  CHECK(cb_plot(s, nullptr) == CB_ERR_CONFIG);

  // unknown task id
  CHECK(cb_oracle_selftest(s, "unknown-task") == CB_ERR_CONFIG);

  // plot on an empty directory reports an internal error, not a crash
  const fs::path dir = fs::temp_directory_path() / "covbench_capi_empty";
  fs::create_directories(dir);
  CHECK(cb_plot(s, dir.string().c_str()) == CB_ERR_INTERNAL);
  fs::remove_all(dir);

  cb_session_free(s);
}

TEST_CASE("config errors in toml are reported as CB_ERR_CONFIG") {
  cb_session* s = cb_session_new();
  const fs::path dir = fs::temp_directory_path() / "covbench_capi_cfg";
  fs::create_directories(dir);
  const fs::path cfg = dir / "bad.toml";
  {
    std::ofstream os(cfg);
    os << "sigmas = [9]\n";
  }
  CHECK(cb_run(s, cfg.string().c_str(), (dir / "out").string().c_str(), 0, 1) == CB_ERR_CONFIG);
  CHECK(std::strlen(cb_last_error(s)) > 0);
  fs::remove_all(dir);
  cb_session_free(s);
}

TEST_CASE("derive_seed through the C surface") {
  const char* labels_a[] = {"task", "obs"};
  const char* labels_b[] = {"obs", "task"};
  CHECK(cb_derive_seed(1, labels_a, 2) == cb_derive_seed(1, labels_a, 2));
  CHECK(cb_derive_seed(1, labels_a, 2) != cb_derive_seed(1, labels_b, 2));
  CHECK(cb_derive_seed(1, labels_a, 2) != cb_derive_seed(2, labels_a, 2));
}

TEST_CASE("tg oracle self-test passes end to end through the C API") {
  cb_session* s = cb_session_new();
  CHECK(cb_oracle_selftest(s, "tg") == CB_OK);
  CHECK(cb_selftest(s) == CB_OK);
  cb_session_free(s);
}
