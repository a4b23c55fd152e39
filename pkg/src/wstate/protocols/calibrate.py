"""Regenerate the bundled scattering preset: ``python3 -m wstate.protocols.calibrate [out.json]``."""

import json
import sys

from .scattering import PRESET_FILE, calibrate_leak_rate, preset_record


def main(argv=None) -> None:
    argv = sys.argv[1:] if argv is None else argv
    n_max, dt, iters, stride = 4, 1e-7, 11, 1e-6
    g, hist = calibrate_leak_rate(n_max=n_max, dt=dt, iterations=iters, record_stride=stride)
    rec = preset_record(g, hist, n_max, dt, 16, stride)
    out = argv[0] if argv else PRESET_FILE
    with open(out, "w") as fh:
        json.dump(rec, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}: gamma_leak = {g:.6g} /s")


if __name__ == "__main__":
    main()
