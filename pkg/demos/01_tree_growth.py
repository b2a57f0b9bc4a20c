"""Watch the incremental tree carve up a stream of three Gaussian blobs.

Splits happen at rounds 2, 4, 8, ...  Each line below is one node: its id
(level, order), how many samples it has trained on, its mixture weight, and
the gap between its two running centroids.
"""
import numpy as np

from idtdetect.data import gen_gauss_mixture_stream
from idtdetect.evaluation import RunConfig, tree_config
from idtdetect.pipeline import TreeMixtureDensity, make_records
from idtdetect.threshold import NORMAL

ds = gen_gauss_mixture_stream(seed=1, length=1000)
normal = ds.X[ds.labels == NORMAL]
model = TreeMixtureDensity(2, tree_config(RunConfig()), theta=0.01, cov_reg=1e-2)

checkpoints = (16, 128, len(normal))
done = 0
for stop in checkpoints:
    recs = make_records(normal[done:stop], np.full(stop - done, NORMAL))
    # continue the same model; round indices keep counting
    for t, rec in enumerate(recs, start=done + 1):
        model.predict(rec.x)
        model.learn(rec.x)
        model.end_round(t)
    done = stop
    print(f"after {stop} samples: {model.n_nodes} nodes")

tree = model.tree
print(f"\n{'node':>8} {'n':>5} {'weight':>8} {'gap':>6}  mean")
for nid in tree.order:
    node = tree.nodes[nid]
    m = tree.member(nid)
    print(f"{str(nid):>8} {node.estimator.count:5d} {node.weight:8.4f} {node.two_means.gap():6.2f}  {np.round(m.mean, 2)}")

# the mixture should put high density on the blobs and low density at the
# anomaly centre (1, 1) between them
for name, x in [("blob (-1, 1)", [-1, 1]), ("blob (2, 2)", [2, 2]), ("gap (1, 1)", [1, 1])]:
    print(f"log p at {name:14s} = {model.log_density(np.array(x, float)):7.3f}")
