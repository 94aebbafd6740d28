"""Contact process on finite graphs: simulation, exact small-graph analytics,
and Monte Carlo checks of extinction and survival bounds."""

__version__ = "0.1.0"
