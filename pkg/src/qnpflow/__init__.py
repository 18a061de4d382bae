"""Power-flow solving, collision-model quantum neurons, and tanh-activated
neural networks for learning the load-flow map."""

__version__ = "0.1.0"
