#pragma once

#include <stdexcept>
#include <string>

namespace specwave {

enum class ErrorKind {
  InvalidDegree,
  OutOfReferenceDomain,
  EmptyVolume,
  InvertedElement,
  MeshUnusable,
  NonConformalMesh,
  InvalidMaterial,
  AssemblyIntegrity,
  CouplingSetup,
  BoundarySetup,
  SourcePlacement,
  DomainMismatch,
  ChannelMismatch,
  BlowUp,
  Config,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidDegree: return "invalid-degree";
    case ErrorKind::OutOfReferenceDomain: return "out-of-reference-domain";
    case ErrorKind::EmptyVolume: return "empty-volume";
    case ErrorKind::InvertedElement: return "inverted-element";
    case ErrorKind::MeshUnusable: return "mesh-unusable";
    case ErrorKind::NonConformalMesh: return "non-conformal-mesh";
    case ErrorKind::InvalidMaterial: return "invalid-material";
    case ErrorKind::AssemblyIntegrity: return "assembly-integrity";
    case ErrorKind::CouplingSetup: return "coupling-setup";
    case ErrorKind::BoundarySetup: return "boundary-setup";
    case ErrorKind::SourcePlacement: return "source-placement";
    case ErrorKind::DomainMismatch: return "domain-mismatch";
    case ErrorKind::ChannelMismatch: return "channel-mismatch";
    case ErrorKind::BlowUp: return "blow-up";
    case ErrorKind::Config: return "configuration";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; `kind()` tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace specwave
