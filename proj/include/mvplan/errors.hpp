#pragma once

#include <stdexcept>
#include <string>

namespace mvplan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MVPLAN_DEFINE_ERROR(Name)            \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

// geometry
MVPLAN_DEFINE_ERROR(DegeneratePath);
MVPLAN_DEFINE_ERROR(OutOfRange);
MVPLAN_DEFINE_ERROR(SingularOffset);
MVPLAN_DEFINE_ERROR(InvalidLateralRate);
MVPLAN_DEFINE_ERROR(ProjectionAmbiguous);
MVPLAN_DEFINE_ERROR(OutsideCorridor);
MVPLAN_DEFINE_ERROR(NonpositiveDuration);
// model
MVPLAN_DEFINE_ERROR(UnsupportedAction);
MVPLAN_DEFINE_ERROR(SchemaError);
MVPLAN_DEFINE_ERROR(InvariantViolation);
// decision / prediction
MVPLAN_DEFINE_ERROR(UnknownVehicle);
MVPLAN_DEFINE_ERROR(NotFullyExpanded);
MVPLAN_DEFINE_ERROR(NonpositiveGap);
MVPLAN_DEFINE_ERROR(NoPriorPlan);
// planner
MVPLAN_DEFINE_ERROR(RegionEmpty);

#undef MVPLAN_DEFINE_ERROR

}  // namespace mvplan
