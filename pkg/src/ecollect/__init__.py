"""Verifiable, privacy-preserving e-collecting over parallel ballot chains.

Voters keep one ciphertext chain per active signature collection; to
participate they swap in an encryption of 1 under a disjunctive
zero-knowledge proof while re-randomizing every other chain, so the public
board never reveals which collection was signed. Tallies are homomorphic
sums decrypted by an n-of-n tallier group with verifiable decryption, and
every message lives on an append-only, deterministically validating bulletin
board that anyone can replay.
"""

__version__ = "0.1.0"
