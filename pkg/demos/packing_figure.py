"""Circle packings of the built-in tori and their period ratios, written as SVG.

    python3 demos/packing_figure.py [outdir]
"""

import sys
from pathlib import Path

from mesoperc.lattices import builtin_torus
from mesoperc.mesh import refine
from mesoperc.packing import pack
from mesoperc.render import render


def main(outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    for name in ("regular", "symmetric90", "k7", "fig1"):
        t0, e0 = builtin_torus(name)
        for N in (1, 4):
            t, e = refine(t0, e0, N)
            cp, res = pack(t, e)
            path = outdir / f"{name}_N{N}.svg"
            path.write_text(render(t, e, cp))
            print(f"{name:12s} N={N}: tau = {cp.tau.real:+.6f}{cp.tau.imag:+.6f}i  "
                  f"residual {res.residual:.1e}  -> {path}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("packings"))
