"""Demultiplexer device profiles: ITU grid mapping, CSV ingestion, pairing.

A device directory contains a ``device.cfg`` (INI-style key/value file)
and one CSV per channel::

    [device]
    name = my_demux
    technology = DTF
    pump_channel = 24            ; or pump_frequency_thz = 384.8

    [channels]
    21 = ch21.csv
    27 = ch27.csv

    [pmd]                        ; optional, differential PMD delay in ps
    21 = 0.3

Channel CSVs carry the header ``frequency_THz,transmission`` with a
strictly increasing frequency grid and transmissions in [0, 1].
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from . import spectral
from .exceptions import IngestionError, InvalidParameterError
from .spectral import ChannelSpectrum

__all__ = [
    "DeviceProfile",
    "itu_channel_frequency_thz",
    "ingest_device",
    "symmetric_pairs",
]

TECHNOLOGIES = ("DTF", "AWG", "DGG", "DGFT", "custom")


def itu_channel_frequency_thz(channel: int) -> float:
    """Standard 100 GHz grid: channel n sits at 190.0 + 0.1 n THz."""
    return 190.0 + 0.1 * channel


@dataclass(frozen=True)
class DeviceProfile:
    """A demultiplexer with channels keyed by ITU channel number."""

    name: str
    technology: str
    channels: dict[int, ChannelSpectrum]
    pump_frequency_thz: float
    pmd_ps: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.technology not in TECHNOLOGIES:
            raise InvalidParameterError(
                f"technology must be one of {TECHNOLOGIES}, got {self.technology!r}"
            )
        if len(set(self.channels)) != len(self.channels):
            raise InvalidParameterError("ITU channel numbers must be distinct")


def ingest_device(directory) -> DeviceProfile:
    """Load and validate a device directory into a profile."""
    directory = Path(directory)
    cfg_path = directory / "device.cfg"
    if not cfg_path.is_file():
        raise IngestionError(f"{cfg_path}: missing device.cfg")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(cfg_path)
    except configparser.Error as exc:
        raise IngestionError(f"{cfg_path}: {exc}") from exc

    if "device" not in parser or "channels" not in parser:
        raise IngestionError(f"{cfg_path}: needs [device] and [channels] sections")
    dev = parser["device"]
    name = dev.get("name", directory.name)
    technology = dev.get("technology", "custom")

    if "pump_frequency_thz" in dev:
        pump = float(dev["pump_frequency_thz"])
    elif "pump_channel" in dev:
        pump = 2.0 * itu_channel_frequency_thz(int(dev["pump_channel"]))
    else:
        raise IngestionError(f"{cfg_path}: set pump_channel or pump_frequency_thz")

    pmd = {}
    if "pmd" in parser:
        for key, value in parser["pmd"].items():
            pmd[int(key)] = float(value)

    channels = {}
    for key, filename in parser["channels"].items():
        try:
            number = int(key)
        except ValueError:
            raise IngestionError(f"{cfg_path}: channel key {key!r} is not an integer") from None
        csv_path = directory / filename
        if not csv_path.is_file():
            raise IngestionError(f"{csv_path}: file not found (channel {number})")
        try:
            freqs, trans = spectral.load_channel_csv(csv_path)
            channels[number] = spectral.tabulated_channel(
                freqs, trans, pmd_delay_ps=pmd.get(number, 0.0))
        except (InvalidParameterError, ValueError) as exc:
            raise IngestionError(f"{csv_path.name} {exc}") from exc
    if not channels:
        raise IngestionError(f"{cfg_path}: no channels listed")

    try:
        return DeviceProfile(name=name, technology=technology, channels=channels,
                             pump_frequency_thz=pump, pmd_ps=pmd)
    except InvalidParameterError as exc:
        raise IngestionError(f"{cfg_path}: {exc}") from exc


def symmetric_pairs(profile: DeviceProfile, tolerance_thz: float = 0.049):
    """Channel pairs (low, high) symmetric about half the pump frequency.

    The default tolerance is just under half the 100 GHz grid spacing, so a
    slightly detuned pump still pairs the nearest-symmetric channels (the
    detuning then shows up as a reduced overlap integral)."""
    pairs = []
    numbers = sorted(profile.channels)
    for i, low in enumerate(numbers):
        for high in numbers[i + 1:]:
            total = (itu_channel_frequency_thz(low)
                     + itu_channel_frequency_thz(high))
            if abs(total - profile.pump_frequency_thz) <= tolerance_thz:
                pairs.append((low, high))
    return pairs
