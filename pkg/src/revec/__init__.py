"""Re-vectorizer for a typed vector SSA IR.

Widens code written with narrow (128-bit era) vector instructions to a
target's maximum vector width by packing isomorphic independent
instructions, with an interpreter as the semantic oracle and a fuzzing
enumerator that discovers narrow-to-wide intrinsic conversions.
"""

__version__ = "0.1.0"
