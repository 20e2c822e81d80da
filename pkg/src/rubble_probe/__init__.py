"""Desk-scale rescue probe stack.

Subsystems: audio feature extraction (dsp), a tiny trainable classifier (nn),
a device-budget model tuner (tuner), evaluation metrics (metrics), synthetic
sound generation (synth, wavio), the serial telemetry codec and calibration
harness (telemetry), a simulated probe (sim), and the message gateway plus
project CLI (gateway, cli).
"""

__version__ = "0.1.0"

from .labels import LABELS, UNCERTAIN
