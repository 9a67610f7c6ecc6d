"""Multi-user MIMO detection laboratory.

Library modules:

- ``modem``    QPSK constellation, bit mapping, hard decisions
- ``channel``  block/Jakes fading, transmission, LS and RLS channel estimation
- ``dfdet``    adaptive decision-feedback detector with RLS updates
- ``ccdet``    constellation-constraint reliability check, candidate rollout,
  multi-branch ordering
- ``refdet``   V-BLAST, exhaustive ML, sphere decoder references
- ``idd``      convolutional code, list-based soft demapper, log-MAP decoder,
  turbo detection loop
- ``harness``  Monte-Carlo experiments, complexity accounting, CSV output
- ``cli``      command-line front end (``mudet`` entry point)
"""

__version__ = "0.1.0"
