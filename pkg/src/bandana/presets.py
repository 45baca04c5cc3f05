"""Named hyperparameter presets for the benchmark datasets.

Each preset carries the pretraining configuration plus the weight decay
used by the node-classification linear probe.
"""

from __future__ import annotations

from .training import TrainConfig

# preset -> (layers, lr, temperature, hidden, out, enc_drop, dec_drop,
#            weight_decay, probe_weight_decay)
_TABLE = {
    "cora":      (3, 1e-2, 0.9,  256, 256, 0.8, 0.0, 5e-5, 5e-3),
    "citeseer":  (5, 2e-2, 0.2,  256, 256, 0.8, 0.0, 5e-5, 1e-1),
    "pubmed":    (2, 1e-3, 0.2,  64,  32,  0.6, 0.7, 5e-5, 5e-5),
    "photo":     (2, 2e-3, 1.0,  256, 64,  0.8, 0.2, 5e-5, 5e-4),
    "computers": (3, 1e-3, 0.4,  256, 64,  0.5, 0.2, 0.0,  5e-4),
    "cs":        (2, 1e-2, 1e-6, 64,  32,  0.8, 0.2, 5e-5, 1e-3),
    "physics":   (2, 2e-3, 0.4,  256, 128, 0.8, 0.2, 5e-5, 1e-3),
}

PRESET_NAMES = tuple(_TABLE)


def preset_config(name: str, seed: int = 0) -> TrainConfig:
    if name not in _TABLE:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    k, lr, tau, hidden, out, enc_drop, dec_drop, wd, _ = _TABLE[name]
    # layer-wise prediction needs equal layer widths for the shared decoder
    mode = "lwp" if (hidden == out or k == 1) else "last"
    return TrainConfig(num_layers=k, hidden_dim=hidden, out_dim=out, lr=lr,
                       temperature=tau, encoder_dropout=enc_drop,
                       decoder_dropout=dec_drop, weight_decay=wd,
                       max_epochs=1000, patience=30, seed=seed,
                       layerwise_mode=mode)


def probe_weight_decay(name: str) -> float:
    if name not in _TABLE:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return _TABLE[name][-1]
