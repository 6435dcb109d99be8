"""
Training a small D3QN signal controller
=======================================

A deliberately short run: a few 15 minute episodes with a narrow network.
The point is the workflow (train, checkpoint, evaluate on held-out seeds),
not a competitive policy.  The acceptance configuration in ``configs/``
holds the settings used for the real comparison.
"""

import tempfile
from pathlib import Path

from atsc.config import ScenarioConfig
from atsc.harness import run_eval, run_training

cfg = ScenarioConfig().with_run(episode_length=900, episodes=3, eval_seeds=(10000, 10001))
cfg = cfg.with_agent(hidden=(32, 32), eps_decay_steps=2000, gamma=0.95)

out = Path(tempfile.mkdtemp(prefix="atsc-demo-"))


def progress(ep, res):
    s = res.summary
    print(f"episode {ep}: reward {res.reward:7.1f}  waiting {s.waiting_s:7.0f} s  conflicts {s.conflicts}")


ckpt = run_training(cfg, out / "train", kind="sed", progress=progress)

# %%
# Greedy evaluation next to the fixed-time baseline.
for kind, ck in (("fixed", None), ("sed", ckpt)):
    for s in run_eval(cfg, kind, out / kind, checkpoint=ck):
        print(f"{kind:5s} waiting {s.waiting_s:7.0f} s  conflicts {s.conflicts:5d}  CO2 {s.co2_g:8.0f} g")

print(f"\nCSV output in {out}")
