"""rewardforge: automated reward design for a 2D racing RL task.

A language model proposes reward programs in a closed DSL, a
preference-grounded alignment filter prunes them, an RL trainer optimizes
the survivors in a deterministic racing environment, and a pluggable judge
ranks the resulting agents to drive the next design round.
"""

__version__ = "0.1.0"
