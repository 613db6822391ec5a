#pragma once

#include <stdexcept>
#include <string>

namespace crossfuse {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ingestion / validation
struct MalformedRow : Error {
    MalformedRow(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line(line), column(column) {}
    std::size_t line;
    std::size_t column;
};
struct DanglingReference : Error { using Error::Error; };
struct DuplicateKey : Error { using Error::Error; };
struct RangeViolation : Error { using Error::Error; };

// study design
struct InsufficientPool : Error { using Error::Error; };
struct OddAllocation : Error { using Error::Error; };

// metrics / stats
struct LengthMismatch : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct OneClassOnly : Error { using Error::Error; };
struct NoPositives : Error { using Error::Error; };
struct TooFewReaders : Error { using Error::Error; };
struct NoDiscordant : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };
struct TooFewGroups : Error { using Error::Error; };

// fusion
struct InfeasibleStratification : Error { using Error::Error; };
struct EmptyGrid : Error { using Error::Error; };
struct MissingModelOutput : Error { using Error::Error; };
struct MissingHumanAssessment : Error { using Error::Error; };

// metacognition
struct TooFewCases : Error { using Error::Error; };
struct OneOutcomeOnly : Error { using Error::Error; };
struct TooFewBins : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };

// economics
struct ZeroVarianceX : Error { using Error::Error; };
struct NonPositiveSlope : Error { using Error::Error; };
struct EmptySchedule : Error { using Error::Error; };

// sim
struct TooLarge : Error { using Error::Error; };

}  // namespace crossfuse
