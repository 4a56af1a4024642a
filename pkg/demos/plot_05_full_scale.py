"""
Full-scale pilot sweep
======================

The 64-antenna, 10^4-trial configuration. Training one network per pilot
length at this size takes hours on a single core, so by default this only
prints the command lines to run; ``--run`` executes them.
"""

import subprocess
import sys

commands = [
    ["prmiso", "train", "--full-scale", "--pilots", str(L), "--snr-db", "-10",
     "--steps", "20000", "--checkpoint", f"ckpt/dnn_nt64_L{L}_snr-10.ckpt"]
    for L in (3, 4, 5, 10, 20)
] + [
    ["prmiso", "sweep-pilots", "--full-scale", "--snr-db", "-10", "--pilots", "3,4,5,10,20",
     "--methods", "dnn,ls,ls-fixed,pcsi,random", "--checkpoint-dir", "ckpt", "--out", "fig_pilots.csv"],
]

for cmd in commands:
    print(" ".join(cmd))
    if "--run" in sys.argv:
        subprocess.run(cmd, check=True)
