// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace minder {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define MINDER_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(what) {}     \
    }

// trace / tensor
MINDER_DEFINE_ERROR(MalformedRow);
MINDER_DEFINE_ERROR(DuplicateSample);
MINDER_DEFINE_ERROR(UnknownMetric);
MINDER_DEFINE_ERROR(TooFewMachines);
MINDER_DEFINE_ERROR(EmptyOverlap);
MINDER_DEFINE_ERROR(AlreadyNormalized);
MINDER_DEFINE_ERROR(WindowTooLong);
MINDER_DEFINE_ERROR(IndexOutOfRange);

// model
MINDER_DEFINE_ERROR(ShapeMismatch);
MINDER_DEFINE_ERROR(NonFiniteLoss);
MINDER_DEFINE_ERROR(NoTrainingData);
MINDER_DEFINE_ERROR(MetricMismatch);
MINDER_DEFINE_ERROR(ModelFormatError);

// prioritization
MINDER_DEFINE_ERROR(SpanUncovered);
MINDER_DEFINE_ERROR(SingleClassDataset);

// detector
MINDER_DEFINE_ERROR(LengthMismatch);
MINDER_DEFINE_ERROR(WindowOutOfRange);
MINDER_DEFINE_ERROR(OutOfOrderVerdict);
MINDER_DEFINE_ERROR(MissingModel);
MINDER_DEFINE_ERROR(GridMismatch);

// simulator / evaluation
MINDER_DEFINE_ERROR(ProfileOutOfBounds);
MINDER_DEFINE_ERROR(TaskSetMismatch);

// configuration / cli
MINDER_DEFINE_ERROR(ConfigError);
MINDER_DEFINE_ERROR(IoError);

#undef MINDER_DEFINE_ERROR

}  // namespace minder
