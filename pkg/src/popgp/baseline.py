"""Feature-blind maximum-likelihood popularity estimate."""

from dataclasses import dataclass

import numpy as np

from .model import RequestHistory


@dataclass(frozen=True)
class MleRates:
    rates: np.ndarray


def mle_rates(history):
    """Per-content sample mean of the request counts (no smoothing)."""
    if not isinstance(history, RequestHistory):
        history = RequestHistory(history)
    return MleRates(history.counts.sum(axis=1) / history.slot_count)
