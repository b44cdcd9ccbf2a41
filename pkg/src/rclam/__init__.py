"""Resource-control lambda calculi: syntax, rewriting, typing, and
strong-normalisation analysis for the natural-deduction and sequent bases
with explicit contraction and/or weakening."""

__version__ = "0.1.0"
