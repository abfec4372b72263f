"""Falling-plate glider toolkit: simulation, controller cloning, complete
ReLU verification and zonotope reachability."""

__version__ = "0.1.0"
