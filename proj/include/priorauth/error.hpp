#pragma once

#include <stdexcept>
#include <string>

namespace priorauth {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PRIORAUTH_DEFINE_ERROR(Name)        \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

// checklist-core
PRIORAUTH_DEFINE_ERROR(SchemaError)
PRIORAUTH_DEFINE_ERROR(StructureError)

// document-ingest
PRIORAUTH_DEFINE_ERROR(EmptyInput)
PRIORAUTH_DEFINE_ERROR(MalformedResource)

// retrieval
PRIORAUTH_DEFINE_ERROR(BackendUnavailable)
PRIORAUTH_DEFINE_ERROR(DimensionMismatch)
PRIORAUTH_DEFINE_ERROR(EmptyIndex)

// agents
PRIORAUTH_DEFINE_ERROR(ClientError)
PRIORAUTH_DEFINE_ERROR(FormatError)
PRIORAUTH_DEFINE_ERROR(AmbiguousOperator)

// propagation
PRIORAUTH_DEFINE_ERROR(ArityError)
PRIORAUTH_DEFINE_ERROR(EmptyChildren)
PRIORAUTH_DEFINE_ERROR(MissingLeafResult)
PRIORAUTH_DEFINE_ERROR(UnknownLeafId)

// evaluation
PRIORAUTH_DEFINE_ERROR(EmptyGold)
PRIORAUTH_DEFINE_ERROR(MisalignedIds)

// adjudication-service
PRIORAUTH_DEFINE_ERROR(UnknownRecord)
PRIORAUTH_DEFINE_ERROR(UnknownLeaf)
PRIORAUTH_DEFINE_ERROR(ConcurrentOverrideConflict)
PRIORAUTH_DEFINE_ERROR(ConfigError)

#undef PRIORAUTH_DEFINE_ERROR

// Raised by the pipeline; `stage()` names the step that failed.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace priorauth
