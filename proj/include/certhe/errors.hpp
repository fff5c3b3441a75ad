#pragma once

#include <stdexcept>
#include <string>

namespace certhe {

/// Pipeline stage that raised an error. Carried so that callers (and the CLI)
/// can report where a calibration run broke down.
enum class Stage {
  geometry,
  cost,
  constraints,
  solve,
  extract,
  io,
  config,
};

inline const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::geometry: return "geometry";
    case Stage::cost: return "cost";
    case Stage::constraints: return "constraints";
    case Stage::solve: return "solve";
    case Stage::extract: return "extract";
    case Stage::io: return "io";
    case Stage::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, const std::string& message)
      : std::runtime_error(std::string("[") + to_string(stage) + "] " + message),
        stage_(stage) {}

  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

}  // namespace certhe
