"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all pipeline failures."""


class ConfigError(PipelineError):
    """Invalid or unresolvable run configuration (CLI exit code 2)."""


class CorpusLoadError(PipelineError):
    """A manifest entry or text file could not be loaded."""


class CorpusValidationError(PipelineError):
    """A corpus document violates an invariant (duplicate id, bad year)."""


class IndexBuildError(PipelineError):
    """Vector index construction failed (e.g. dimension mismatch)."""


class RetrievalError(PipelineError):
    """A retrieval query could not be answered."""


class ProviderError(PipelineError):
    """An external model provider failed after retries."""


class CapabilityError(ProviderError):
    """The provider cannot supply something the pipeline requires
    (e.g. per-token probabilities)."""


class QueryError(PipelineError):
    """Every generation for a causal query failed."""


class GroundTruthError(PipelineError):
    """The ground-truth edge list is malformed (self-loop, cycle, bad label)."""


class UndefinedMetricError(PipelineError):
    """A metric has no defined value for the given inputs (e.g. AUROC with
    a single class)."""
