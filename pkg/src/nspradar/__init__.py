"""Monte Carlo study of MIMO radar target detection when the transmit
waveform is projected onto the null space of a radar-to-BS interference
channel for spectrum sharing."""

__version__ = "0.1.0"
