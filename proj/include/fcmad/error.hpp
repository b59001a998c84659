#pragma once

#include <stdexcept>
#include <string>

namespace fcmad {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Shape,
  Numeric,
  Range,
  Geometry,
  Topology,
  Misuse,
  Config,
  Coverage,
  Metric,
  Protocol,
  Alignment,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FCMAD_DEFINE_ERROR(Name, Kind)                                 \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

FCMAD_DEFINE_ERROR(ShapeError, Shape)
FCMAD_DEFINE_ERROR(NumericError, Numeric)
FCMAD_DEFINE_ERROR(RangeError, Range)
FCMAD_DEFINE_ERROR(GeometryError, Geometry)
FCMAD_DEFINE_ERROR(TopologyError, Topology)
FCMAD_DEFINE_ERROR(MisuseError, Misuse)
FCMAD_DEFINE_ERROR(ConfigError, Config)
FCMAD_DEFINE_ERROR(CoverageError, Coverage)
FCMAD_DEFINE_ERROR(MetricError, Metric)
FCMAD_DEFINE_ERROR(ProtocolError, Protocol)
FCMAD_DEFINE_ERROR(AlignmentError, Alignment)
FCMAD_DEFINE_ERROR(IoError, Io)

#undef FCMAD_DEFINE_ERROR

}  // namespace fcmad
