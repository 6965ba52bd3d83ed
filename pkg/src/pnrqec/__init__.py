"""Bosonic error-correcting codes from heralded two-mode Gaussian states.

Modules: ``specialfn`` (terminating hypergeometric series, Hermite
polynomials, dB conversion), ``fockspace`` (truncated Fock-space containers),
``genstates`` (the generated state family and its scheme map), ``channels``
(loss and dephasing Kraus sets), ``qec`` (QEC matrix, KL diagnostic,
transpose-channel fidelity), ``codesearch`` (constraint solving and sweeps)
and ``cli``.
"""

__version__ = "0.1.0"
