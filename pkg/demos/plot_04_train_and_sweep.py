"""
Training the pilot-to-alignment networks and sweeping pilot length
==================================================================

Two small networks read the raw pilots (gNB: uplink, UE: downlink) and output
polarization angles and a beamformer directly, trained end to end on the
beamforming gain. The sweep compares them with LS estimation, perfect CSI
and the random baseline on the same test channels.

Kept small so it runs in about a minute; pass ``--steps`` to train longer.
"""

import argparse
import tempfile

from prmiso.bench import SweepSpec, format_row, run_sweep, CSV_HEADER

parser = argparse.ArgumentParser()
parser.add_argument("--nt", type=int, default=4)
parser.add_argument("--steps", type=int, default=1500)
args = parser.parse_args()

with tempfile.TemporaryDirectory() as ckpt:
    # networks are trained once per pilot length and cached as checkpoints
    spec = SweepSpec(n_t=args.nt, methods=("dnn", "ls", "ls-fixed", "pcsi", "random"),
                     pilot_lengths=(2, 3), snr_dbs=(0.0,), n_trials=1000, seed=4,
                     checkpoint_dir=ckpt, train_steps=args.steps,
                     train_overrides={"batch_size": 256})
    rows = run_sweep(spec)

print(CSV_HEADER)
for row in rows:
    print(format_row(row))
