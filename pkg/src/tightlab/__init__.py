"""Labor-demand toolkit: hiring-cost model, synthetic panels, shift-share IV."""

__version__ = "0.1.0"
