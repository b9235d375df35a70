"""Non-convex landscape laboratory: objectives, manifold calculus, optimizers and certifiers."""

__version__ = "0.1.0"
