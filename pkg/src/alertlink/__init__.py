"""alertlink: incident-aware duplicate ticket aggregation.

Links cloud alerts into per-incident event graphs (template parsing,
PMI relation learning, knee-point graph pruning) and correlates customer
tickets to responsible events with an attentive interaction model, so
that semantically dissimilar tickets caused by one incident end up in
one cluster.
"""

from .models import (
    Alert,
    Event,
    EventGraph,
    PipelineConfig,
    Ticket,
    ValidationError,
    Window,
)
from .pipeline import ClusterAssignment, PipelineArtifacts, run_offline, run_online

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "Ticket",
    "Event",
    "Window",
    "EventGraph",
    "PipelineConfig",
    "ValidationError",
    "ClusterAssignment",
    "PipelineArtifacts",
    "run_offline",
    "run_online",
    "__version__",
]
