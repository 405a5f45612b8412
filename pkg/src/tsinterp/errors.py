"""Exception hierarchy shared across the package."""


class TsInterpError(Exception):
    """Base class for all package errors."""


class ConfigError(TsInterpError):
    """Invalid configuration value or file."""


# --- generation ---

class NonFiniteState(TsInterpError):
    """An ODE trajectory produced NaN/Inf (divergence)."""


class GenerationFailed(TsInterpError):
    """Sample generation failed after the retry budget was exhausted."""


class DegenerateSample(TsInterpError):
    """Sample is (numerically) constant and cannot be rescaled."""


class WindowTooLong(TsInterpError):
    """Requested corruption window exceeds the series length."""


# --- storage ---

class FormatVersionMismatch(TsInterpError):
    """Container was written with an unsupported format version."""


class ShapeMismatch(TsInterpError):
    """Tensor byte counts or shapes disagree with the manifest."""


class IoFailure(TsInterpError):
    """Underlying filesystem error while reading/writing a container."""


class EmptyClassSplit(TsInterpError):
    """A stratified split left some class without training samples."""


# --- models / scoring ---

class Diverged(TsInterpError):
    """Training loss became non-finite."""


class ExternalScorerFailure(TsInterpError):
    """External scoring process failed mid-evaluation."""


class HandshakeFailed(ExternalScorerFailure):
    """External scorer handshake missing or inconsistent with the dataset."""


class ProtocolViolation(ExternalScorerFailure):
    """Malformed frame on the scoring wire protocol."""


class ScorerTimeout(ExternalScorerFailure):
    """External scorer did not answer within the per-request timeout."""


class MethodUnsupportedForScorer(TsInterpError):
    """Attribution method needs a capability the scorer does not provide."""


# --- attribution / evaluation ---

class SingularRegression(TsInterpError):
    """KernelSHAP regression system was singular even after resampling."""


class NoPositiveRelevance(TsInterpError):
    """A relevance map has no strictly positive entries."""


class DegenerateReference(TsInterpError):
    """Original score coincides with the expectancy; normalized drop undefined."""


class NoValidPairs(TsInterpError):
    """No quantile pairs with non-degenerate TIC differences."""


class InsufficientSamples(TsInterpError):
    """Too few evaluable samples to aggregate a report."""
