#pragma once

#include <stdexcept>
#include <string>

namespace dca {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// grid-model
struct SchemaError : Error { using Error::Error; };
struct ReferenceError : Error { using Error::Error; };
struct ConnectivityError : Error { using Error::Error; };
struct IslandedRegionError : Error { using Error::Error; };
struct SlackError : Error { using Error::Error; };
struct SpecMismatchError : Error { using Error::Error; };
struct ZeroImpedanceError : Error { using Error::Error; };
struct UnknownBranchError : Error { using Error::Error; };

// powerflow-core
struct NonConvergence : Error { using Error::Error; };
struct SingularJacobianError : Error { using Error::Error; };
struct MissingVoltageError : Error { using Error::Error; };

// boundary-jfng
struct RegionSolveError : Error {
  RegionSolveError(int region, const std::string& what)
      : Error(what), region_index(region) {}
  int region_index;
};
struct LayoutMismatchError : Error { using Error::Error; };
struct MaxIterations : Error { using Error::Error; };
struct StagnationError : Error { using Error::Error; };
struct NotConvergedError : Error { using Error::Error; };

// ccs-screening
struct SingularMatrixError : Error { using Error::Error; };
struct UnknownNodeError : Error { using Error::Error; };

// coordination
struct ProtocolError : Error { using Error::Error; };
struct BadMagic : ProtocolError { using ProtocolError::ProtocolError; };
struct UnknownVersion : ProtocolError { using ProtocolError::ProtocolError; };
struct UnknownType : ProtocolError { using ProtocolError::ProtocolError; };
struct TruncatedFrame : ProtocolError { using ProtocolError::ProtocolError; };
struct OversizePayload : ProtocolError { using ProtocolError::ProtocolError; };
struct HandshakeTimeout : Error { using Error::Error; };
struct LayoutHashMismatch : Error { using Error::Error; };
struct DuplicateRegion : Error { using Error::Error; };
struct SlotTimeout : Error { using Error::Error; };
struct ConnectionLost : Error { using Error::Error; };

// dca-engine
struct IoError : Error { using Error::Error; };

}  // namespace dca
