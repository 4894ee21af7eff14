"""damctl - optimal output-rate control for a large dam (state-dependent M/GI/1 queue)."""

__version__ = "0.1.0"
