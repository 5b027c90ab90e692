"""Exception hierarchy shared across the pipeline.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError subclasses -> 3,
EndpointError subclasses -> 4.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Invalid or missing configuration."""


class DataError(PipelineError):
    """Base class for input/corpus/annotation problems."""


# --- tex_corpus ---

class MissingInclude(DataError):
    """An inclusion directive references a file absent from the source tree."""


class InclusionCycle(DataError):
    """The inclusion graph reachable from the root is cyclic."""


class AmbiguousRoot(DataError):
    """More than one file in a paper directory begins a document environment."""


class NoDocumentBody(DataError):
    """No document environment was found in the root file."""


class EmptyDocument(DataError):
    """The parsed document contains zero text tokens."""


# --- context_builder ---

class UnknownFamily(DataError):
    """A section-family identifier is not present in the synonym configuration."""


# --- annotation_store ---

class SchemaViolation(DataError):
    """An input file does not conform to its documented schema."""


class OverlapError(DataError):
    """A paper id appears both as a positive and as a negative."""


# --- prompt_factory ---

class UnboundPlaceholder(DataError):
    """An instruction pattern contains a placeholder other than Context/Question."""


class EmptyGold(DataError):
    """Attempted to serialize an empty gold quadruple list."""


class EmptyBucket(DataError):
    """A prompt set was requested for an empty split bucket."""


# --- eval_harness ---

class EmptyInput(DataError):
    """A metric was invoked on an empty instance list."""


# --- inference_gateway ---

class EndpointError(PipelineError):
    """Base class for remote-inference failures."""


class UnknownInstanceId(DataError):
    """A predictions file refers to an instance id that was never issued."""


class EndpointUnreachable(EndpointError):
    """No request against the endpoint ever produced an HTTP response."""
