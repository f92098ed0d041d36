"""Sweep the OOB/PAPR weight on a few hundred symbols.

Run: python3 demos/02_oob_papr_tradeoff.py
The full-size sweep is ``suppalign run tradeoff``.
"""
from suppalign.experiments.runners import run_tradeoff_experiment
from suppalign.experiments.scenario import parse_scenario

scenario = parse_scenario({
    "name": "demo-tradeoff", "seed": 5, "chunk_symbols": 100,
    "tradeoff": {"alpha": 0.25, "lams": [0.0, 0.25, 0.5, 0.75, 1.0],
                 "num_symbols": 400, "symbols_per_channel": 100},
})
table = run_tradeoff_experiment(scenario)
print(" lam   OOB reduction   mean PAPR reduction")
for point, oob in table.select("oob_reduction_db"):
    gain = table.get("mean_papr_reduction_db", **point)
    print(f"{point['lam']:4.2f}   {oob:8.1f} dB     {gain:8.2f} dB")
