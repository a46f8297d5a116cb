"""Gradual verification toolchain for the GCL contract language.

Pipeline: frontend (lex/parse/resolve) -> static verifier (symbolic
execution over implicit dynamic frames, linear-arithmetic prover) ->
weaver (residual run-time checks) -> ledger VM (permissions, gas,
atomic transactions), validated by an independent dynamic oracle.
"""

__version__ = "0.1.0"
