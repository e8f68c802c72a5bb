#pragma once

#include <stdexcept>
#include <string>

namespace rowperm {

/// Base class for all rowperm exceptions; carries a short category tag
/// used for CLI exit reporting.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& msg)
        : std::runtime_error(category + ": " + msg), category_(std::move(category)) {}

    const std::string& category() const { return category_; }

private:
    std::string category_;
};

#define ROWPERM_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& msg) : Error(#Name, msg) {} \
    }

ROWPERM_DEFINE_ERROR(NonPositiveScale);
ROWPERM_DEFINE_ERROR(DegenerateBoundary);
ROWPERM_DEFINE_ERROR(ParameterProblemDiverged);
ROWPERM_DEFINE_ERROR(UnsupportedShape);
ROWPERM_DEFINE_ERROR(OriginConjugate);
ROWPERM_DEFINE_ERROR(RayExitsDomain);
ROWPERM_DEFINE_ERROR(QuadratureBudgetExceeded);
ROWPERM_DEFINE_ERROR(BoundaryEvaluation);
ROWPERM_DEFINE_ERROR(ContourHitsObstacle);
ROWPERM_DEFINE_ERROR(RegimeMismatch);
ROWPERM_DEFINE_ERROR(ReflectionsDiverged);
ROWPERM_DEFINE_ERROR(BlobEnteredHole);
ROWPERM_DEFINE_ERROR(SupportReachedSegment);
ROWPERM_DEFINE_ERROR(DegenerateFit);
ROWPERM_DEFINE_ERROR(InvalidArgument);

#undef ROWPERM_DEFINE_ERROR

} // namespace rowperm
