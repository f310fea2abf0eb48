"""qpairsim: entangled photon-pair distribution over DWDM channels.

Characterizes demultiplexer channel pairs (overlap integrals, quality
factor, PMD wavepacket overlap), propagates the two-photon polarization
state through noise and dephasing, evaluates Bell-test observables
analytically, and reproduces them with an event-level Monte Carlo of
gated single-photon detection.
"""

__version__ = "0.1.0"

from . import counting, devices, kernels, montecarlo, quantum, spectral  # noqa: F401
from .counting import DetectorParams, SourceParams  # noqa: F401
from .montecarlo import BellResult, CountRecord, ExperimentConfig  # noqa: F401
from .quantum import MeasurementSetting, PolarizationModel, TwoQubitState  # noqa: F401
from .spectral import ChannelSpectrum, PairOverlap, TemporalProfile  # noqa: F401
