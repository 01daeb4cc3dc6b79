# %% [markdown]
# Fidelity: how far a sample's degree distributions drift from the original
# as the ratio shrinks. Lower D is better. Every user here has exactly ten
# interactions, so the user-degree D hits 1 as soon as each kept user loses
# one. Pinterest-style sampling keeps users whole and stays at 0.

# %%
from recsample.fidelity import fidelity_report
from recsample.ingest import SyntheticSpec, generate_synthetic
from recsample.samplers import SampleSpec, sample_pipeline

cg, kg = generate_synthetic(SyntheticSpec(num_users=400, num_items=200, edges_per_user=10,
                                          degree_exponent=0.8, seed=1))

# %%
ratios = (0.05, 0.1, 0.2, 0.5)
for kind in ("ff", "rw", "ps", "ts", "ns"):
    cells = []
    for ratio in ratios:
        res = sample_pipeline(cg, kg, SampleSpec(kind, ratio, seed=0))
        rep = fidelity_report((cg, kg), (res.cg_sample, res.kg_sample), res.kg_map)
        d = rep.d_statistics
        cells.append(f"{d['cg_user']:.2f}/{d['cg_item']:.2f}")
    print(f"{kind:4}", "  ".join(f"a={r:<4} {c}" for r, c in zip(ratios, cells)))

# %% [markdown]
# User ratio and time skew for one sample of each kind.

# %%
for kind in ("ps", "ts", "ns"):
    res = sample_pipeline(cg, kg, SampleSpec(kind, 0.2, seed=0))
    rep = fidelity_report((cg, kg), (res.cg_sample, res.kg_sample), res.kg_map)
    print(f"{kind}: user ratio {rep.user_ratio_original:.2f} -> {rep.user_ratio_sample:.2f}, "
          f"time skew {rep.stime_original:+.2f} -> {rep.stime_sample:+.2f}")
