"""Extended-phase-space quantum mechanics toolkit for the harmonic oscillator."""

__version__ = "0.1.0"
