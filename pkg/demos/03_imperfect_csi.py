"""Leakage into the data window when the transmitter's channel estimate is off.

Run: python3 demos/03_imperfect_csi.py
"""
import numpy as np

from suppalign import SystemConfig
from suppalign.analysis import leakage_trial_block

cfg = SystemConfig(alpha=0.25)
sigmas = [1e-3, 1e-2, 1e-1]
leak, count, closed = leakage_trial_block(cfg, sigmas, 20, 100, np.random.default_rng(3),
                                          closed_form=True)
print("channel MSE   simulated leak   closed form   leak below MSE")
for s, mc, cf in zip(sigmas, leak / count, closed / count):
    print(f"{s:10.0e}   {10 * np.log10(mc):10.2f} dB   {10 * np.log10(cf):8.2f} dB"
          f"   {10 * np.log10(s / mc):8.1f} dB")
