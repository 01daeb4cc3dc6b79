# %% [markdown]
# A small benchmark grid: every sampler at two ratios, two seeds, with the
# full-data baseline trained once per seed. The same run is available as
# ``recsample pipeline --dataset synthetic ...``.

# %%
import csv
import tempfile
from collections import defaultdict
from pathlib import Path

from recsample.pipeline import PipelineConfig, report, run_pipeline

workdir = Path(tempfile.mkdtemp(prefix="recsample-grid-"))
config = PipelineConfig(dataset="synthetic", workdir=str(workdir), ratios=(0.1, 0.5),
                        seeds=(0, 1), ks=(10,), min_span_days=0)
result = run_pipeline(config)
summary = report(workdir)
print(f"{summary['records']} runs written under {workdir}")

# %% [markdown]
# Relative change against the baseline, averaged over seeds. Negative time
# deltas mean faster training.

# %%
cells = defaultdict(dict)
for c in summary["cells"]:
    if c["method"] == "inmo" and (c["metric"], c["k"]) in (("ndcg", 10), ("train_seconds", "")):
        cells[(c["sampler"], c["ratio"])][c["metric"]] = c["delta_mean"]
print(f"{'sampler':8} {'ratio':>5} {'ndcg@10':>8} {'train time':>10}")
for (sampler, ratio), d in sorted(cells.items()):
    print(f"{sampler:8} {ratio:5} {d['ndcg']:+8.1%} {d['train_seconds']:+10.1%}")

# %%
with open(workdir / "report.csv") as fh:
    rows = list(csv.DictReader(fh))
toppop = next(r for r in rows if r["method"] == "toppop" and r["metric"] == "ndcg")
print("toppop ndcg@10:", round(float(toppop["value"]), 4))
