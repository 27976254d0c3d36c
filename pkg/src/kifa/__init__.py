"""kifa: skeleton action recognition with kinetic fuzzy intensity indexing.

Classifies skeleton key-point sequences into five actions with a recurrent
network carrying joint and temporal attention, scores each action's kinetic
intensity from the attention weights via fuzzy entropies, and indexes it as
mild or intense through an adaptive fuzzy inference system.
"""

__version__ = "0.1.0"
