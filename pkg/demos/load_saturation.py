#!/usr/bin/env python3
"""Utilisation against network size, and where saturation lands.

The busiest node's utilisation (busy seconds over elapsed seconds)
grows roughly linearly with network size until it pins at 1.0.  For
the default microcontroller profile that happens within the sampled
sizes.  The low-power implant profile stays far from saturation at
realistic sizes, so the study fits a line through the pre-saturation
points and extrapolates to the size where utilisation would hit 1.0.
"""

from dataclasses import replace

from pbftsim.sweeps import load_preset, run_load_study


def show(title: str, study) -> None:
    print(title)
    for point in study.points:
        bar = "#" * round(40 * point.load)
        print(f"  {point.nodes:3d} nodes  {point.load:5.1%}  {bar}")
    if study.saturation_nodes is not None:
        print(f"  fit: load ~ {study.slope:.4f} * nodes "
              f"{study.intercept:+.3f}, saturating at "
              f"{study.saturation_nodes:.0f} nodes")
    else:
        print(f"  no saturation estimate: {study.warning}")
    print()


def main() -> None:
    spec = load_preset("EXP-LOAD")
    sizes = tuple(spec.values)
    show("default profile (8-bit microcontroller, 10 Mbit/s):",
         run_load_study(spec.base, nodes=sizes))
    show("implant profile (16-byte payloads, 1 Mbit/s):",
         run_load_study(replace(spec.base, device_profile="implant"),
                        nodes=sizes))


if __name__ == "__main__":
    main()
