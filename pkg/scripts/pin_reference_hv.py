"""Regenerate the pinned bnh reference-front hypervolume.

Usage: python scripts/pin_reference_hv.py
Copy the printed value into ``BNH_REFERENCE_HV`` in src/modebi/bench.py.
"""

from modebi.bench import BNH_REF_POINT, BNH_REFERENCE_RESOLUTION, bnh, reference_front_hv

if __name__ == "__main__":
    value = reference_front_hv(bnh(), BNH_REFERENCE_RESOLUTION, BNH_REF_POINT)
    doubled = reference_front_hv(bnh(), 2 * BNH_REFERENCE_RESOLUTION, BNH_REF_POINT)
    print(f"resolution {BNH_REFERENCE_RESOLUTION}: {value!r}")
    print(f"resolution {2 * BNH_REFERENCE_RESOLUTION}: {doubled!r} "
          f"(relative change {abs(doubled - value) / value:.2e})")
