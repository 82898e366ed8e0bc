"""Tools for ARC grid tasks and recorded human solving trajectories.

Subpackages cover the full pipeline: parsing task and trajectory files
(ingest), the deterministic grid-editing interpreter (engine), replaying
and auditing logged trajectories (replay), selection/color/intention
analytics (analytics), corpus statistics (stats), training-tuple export
(export), and a live recording HTTP service (service).
"""

__version__ = "0.1.0"
