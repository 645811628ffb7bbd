"""muPVS: an IDE backend for a miniature higher-order specification language.

The package provides lexing/parsing with error recovery, typechecking with
proof obligations, a Gentzen sequent-calculus prover with interactive proof
trees, a ground-term evaluator, parallel prover sessions, and a JSON-RPC
language server exposing the lot, plus a batch CLI.
"""

__version__ = "0.1.0"
