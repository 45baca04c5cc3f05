"""Graph self-supervised pretraining with non-discrete bandwidth masks."""

import os as _os

# Pin BLAS thread pools before numpy is imported anywhere; single-threaded
# execution is the default so that runs are bitwise reproducible.
_threads = _os.environ.get("BANDANA_NUM_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .graph import Graph, graph_from_edges, load_dataset, save_dataset, subgraph_with_edges
from .generators import gen_karate_club, gen_swiss_roll, gen_two_moon, identity_features
from .splits import EdgeSplit, load_split, sample_negative_edges, save_split, split_edges
from .tensor import SparseMatrix, Tape, Tensor, backward, grouped_softmax, spmm
from .optim import Adam, AdamState, adam_step
from .masking import (BandwidthMaskSet, calculated_mask_ratio, measured_mask_ratio,
                      perturbed_adjacency, sample_bandwidth_masks,
                      sample_bernoulli_masks, sample_truncgauss_masks,
                      sample_uniform_masks)
from .model import (ModelParams, decode_edge_scores, encode, init_params,
                    normalize_propagation)
from .training import (TrainConfig, TrainHistory, bandwidth_loss, discrete_ce_loss,
                       embed, layerwise_loss, pretrain, pretrain_discrete_baseline)
from .evaluation import (Metrics, auc, average_precision, dot_product_probe,
                         hits_at_k, linear_probe, micro_macro_f1, node_split)
from .diagnostics import (DiagnosticsReport, count_components, ego_dirichlet_energy,
                          ego_entropy_histogram, export_embeddings,
                          global_dirichlet_energy, pca2d, verify_energy_theorem)
from .presets import PRESET_NAMES, preset_config, probe_weight_decay
