"""Adapter error types."""


class AdapterError(Exception):
    pass


class CheckpointLoadError(AdapterError):
    """Checkpoint directory missing or unreadable."""


class OutOfMemory(AdapterError):
    """Generation or training ran out of memory; carries the offending id."""


class AcceleratorUnavailable(AdapterError, EnvironmentError):
    """Quantized finetuning was requested without a CUDA device."""
