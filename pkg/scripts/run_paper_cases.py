#!/usr/bin/env python3
"""Reproduce the benchmark convergence studies and render their figures.

Runs each preset over the requested refinement levels, writes the
convergence/EOC CSVs under out/<preset>/, and (when the plots package has
been built: cd plots && npm install && npm run build) renders the log-log
figures next to the CSVs.
"""

import argparse
import pathlib
import shutil
import subprocess
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]

CASES = {
    "paper-case1": dict(levels="1,2,3", T="0.5", cols="e_u_ah,e_p_l2l2,e_n_linf_l2,e_Pu_linf_l2", slopes="2,3"),
    "paper-case2": dict(levels="1,2,3", T="0.5", cols="e_u_ah,e_p_l2l2,e_u_h1,e_n_linf_l2", slopes="1,2"),
    "paper-case1-kg1": dict(levels="1,2,3", T="0.5", cols="e_u_ah,e_p_l2l2,e_u_linf_l2,e_Pu_linf_l2", slopes="1,2"),
    "paper-osc": dict(levels="1,2", T="1.0", cols="e_u_ah,e_p_l2l2,e_n_linf_l2", slopes="1,2"),
    "paper-osc-pm": dict(levels="1,2", T="1.0", cols="e_u_ah,e_p_l2l2,e_n_linf_l2", slopes="1,2"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", default=",".join(CASES), help="comma-separated preset names")
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--full-T", action="store_true", help="run the full benchmark horizons instead of T=0.5")
    args = ap.parse_args()

    plot_cli = ROOT / "plots" / "dist" / "cli.js"
    node = shutil.which("node")
    for name in args.cases.split(","):
        case = CASES[name]
        outdir = pathlib.Path(args.out) / name
        outdir.mkdir(parents=True, exist_ok=True)
        cmd = [sys.executable, "-m", "surfns.cli", "sweep", "--preset", name,
               "--levels", case["levels"], "--out", str(outdir)]
        if not args.full_T:
            cmd += ["--T", case["T"]]
        print("+", " ".join(cmd), flush=True)
        subprocess.run(cmd, check=True)
        if node and plot_cli.exists():
            fig = outdir / "convergence.svg"
            subprocess.run([node, str(plot_cli), str(outdir / "convergence.csv"),
                            "--cols", case["cols"], "--slopes", case["slopes"],
                            "--title", name, "-o", str(fig)], check=True)
            print(f"  figure: {fig}")
        else:
            print("  (plots package not built; skipping figure)")


if __name__ == "__main__":
    main()
