#!/usr/bin/env python3
"""Regenerate the bundled synthetic DTF-like device directory.

Writes flat-top (order 4) channel curves for ITU channels 21-27 (minus the
pump channel 24) sampled every 2 GHz over +-150 GHz, peak transmission 0.7.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qpairsim import spectral
from qpairsim.devices import itu_channel_frequency_thz

OUT = Path(__file__).resolve().parents[1] / "configs" / "devices" / "dtf_like"
CHANNELS = (21, 22, 23, 25, 26, 27)
PEAK_T = 0.7
FWHM_GHZ = 100.0


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    lines = [
        "[device]",
        "name = dtf_like",
        "technology = DTF",
        "pump_channel = 24",
        "",
        "[channels]",
    ]
    for number in CHANNELS:
        center = itu_channel_frequency_thz(number)
        ch = spectral.make_channel("flattop", center, FWHM_GHZ, 1.0, 3.0, order=4)
        offsets = np.arange(-150.0, 150.0 + 1e-9, 2.0)
        tau = ch.tau(offsets) * PEAK_T
        csv_name = f"ch{number}.csv"
        with open(OUT / csv_name, "w") as fh:
            fh.write("frequency_THz,transmission\n")
            for off, t in zip(offsets, tau):
                fh.write(f"{center + off / 1e3:.6f},{t:.8f}\n")
        lines.append(f"{number} = {csv_name}")
    (OUT / "device.cfg").write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
