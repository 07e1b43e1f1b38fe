#pragma once

#include <stdexcept>

namespace anomsynth {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error { using Error::Error; };

// imagery
struct IoFailure : Error { using Error::Error; };
struct MalformedHeader : Error { using Error::Error; };
struct UnsupportedMaxval : Error { using Error::Error; };
struct TruncatedPayload : Error { using Error::Error; };

// codec
struct DimensionMismatch : Error { using Error::Error; };
struct TooFewPatches : Error { using Error::Error; };
struct CodebookMismatch : Error { using Error::Error; };
struct BadMagic : Error { using Error::Error; };
struct HashMismatch : Error { using Error::Error; };

// prompting / synthgen
struct EmptyMask : Error { using Error::Error; };
struct EmptyCorpus : Error { using Error::Error; };
struct BoxMismatch : Error { using Error::Error; };

// armodel / sampler
struct EmptyTrainingSet : Error { using Error::Error; };
struct OutOfBounds : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct DegenerateMask : Error { using Error::Error; };

// qaw
struct DegenerateBatch : Error { using Error::Error; };
struct DegeneratePopulation : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };

// detector
struct WeightLengthMismatch : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };
struct ImageTooSmall : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };

}  // namespace anomsynth
