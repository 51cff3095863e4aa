"""Named preset scenarios, one per reproduced figure dataset.

Each entry is ``(command, overrides)``. Overrides sit on top of the config
defaults, and a user file or ``--set`` values sit on top of the preset, so a
preset can be retargeted
(e.g. ``fig8`` with ``geometry.kind: ring`` for the ring detuning scan).
"""
from __future__ import annotations

import numpy as np

PRESETS = {
    "fig2a": ("potential", {
        "geometry": {"kind": "chain", "n": 2, "a0": 0.6, "theta": float(np.pi / 2)},
        "params": {"trap_freq": 0.1},
        "potential": {"grid_min": 0.1, "grid_max": 3.0},
    }),
    "fig2c": ("potential", {
        "geometry": {"kind": "chain", "n": 2, "a0": 0.6},
        "params": {"trap_freq": 0.1},
        "potential": {"grid_min": 0.06, "grid_max": 3.0,
                      "thetas": [float(t) for t in np.linspace(0.0, 0.5, 26) * np.pi]},
    }),
    "fig3a": ("sweep", {
        "geometry": {"kind": "chain", "n": 4},
        "params": {"trap_freq": 1.0},
        "sweep": {"axis": "a0", "start": 0.3, "stop": 1.6, "num": 27},
    }),
    "fig3b": ("sweep", {
        "geometry": {"kind": "chain", "n": 10},
        "params": {"trap_freq": 1.0},
        "sweep": {"axis": "a0", "start": 0.3, "stop": 1.6, "num": 27},
    }),
    "fig4": ("spectrum", {
        "geometry": {"kind": "chain", "n": 30, "a0": 0.5},
        "params": {"trap_freq": 1.0},
        "ensemble": {"disorder_amplitude": 0.01, "base_seed": 0},
        "spectrum": {"k_points": 2001},
    }),
    "fig5c": ("sweep", {
        "geometry": {"kind": "ring", "n": 4},
        "params": {"trap_freq": 0.1},
        "run": {"motion_axes": "xy"},
        "sweep": {"axis": "a0", "start": 1.0, "stop": 2.0, "num": 21},
    }),
    "fig5d": ("sweep", {
        "geometry": {"kind": "ring", "n": 10},
        "params": {"trap_freq": 0.1},
        "run": {"motion_axes": "xy"},
        "sweep": {"axis": "a0", "start": 1.0, "stop": 2.0, "num": 21},
    }),
    "fig6": ("simulate", {
        "geometry": {"kind": "chain", "n": 4, "a0": 0.5},
        "params": {"trap_freq": 1.0},
        "run": {"mode": "full", "t_max": 4e4},
        "ensemble": {"n_realizations": 1},
    }),
    "fig7": ("sweep", {
        "geometry": {"kind": "chain", "n": 10},
        "params": {"trap_freq": 1.0},
        "ensemble": {"n_realizations": 20},
        "sweep": {"axis": "a0", "start": 0.3, "stop": 1.6, "num": 27},
    }),
    "fig8": ("sweep", {
        "geometry": {"kind": "chain", "n": 10, "a0": 0.5},
        "params": {"trap_freq": 1.0},
        "ensemble": {"n_realizations": 20},
        "sweep": {"axis": "detuning", "start": -1.0, "stop": 1.0, "num": 21},
    }),
}
