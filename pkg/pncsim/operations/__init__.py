# pncsim/operations/__init__.py

"""
Simulation building blocks, bottom-up:

- gfcode: GF(4) symbols and log-domain vector algebra.
- ldpc: parity-check matrices, code construction, encoding.
- macchannel: asynchronous MAC model, spectral factorization, simulation.
- detector: trellis and BCJR (B_MAC).
- jointdec: Log-G-SPA and the JCNC baseline.
- framesync: zero padding, CRC-16, delay resolution, broadcast recovery.
- harness: Monte-Carlo trials and sweeps.
- sweeps: stored sweep results.
"""
