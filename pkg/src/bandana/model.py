"""Weighted GCN encoder over perturbed adjacencies and the shared MLP
edge decoder.

Each encoder layer computes ``elu(batchnorm(G_k @ dropout(Z) @ W_k))``
where ``G_k`` is the degree-normalized perturbed adjacency of that layer.
One 2-layer MLP decoder scores node pairs from the elementwise product of
their representations; the same decoder serves every layer's output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import masking
from .graph import Graph
from .tensor import (BatchNormState, SparseMatrix, Tensor, add_bias, batchnorm,
                     dropout, elu, gather_rows, matmul, multiply, sigmoid, spmm)

BN_MOMENTUM = 0.1


@dataclass
class EncoderLayer:
    weight: Tensor
    gamma: Tensor
    beta: Tensor
    bn_state: BatchNormState


@dataclass
class ModelParams:
    """Encoder layer weights plus the shared 2-layer edge decoder."""

    encoder_layers: list
    dec_w1: Tensor
    dec_b1: Tensor
    dec_w2: Tensor
    dec_b2: Tensor
    dims: tuple
    dropout_rates: tuple = (0.0, 0.0)

    @property
    def num_layers(self) -> int:
        return len(self.encoder_layers)

    def all_tensors(self) -> dict[str, Tensor]:
        out = {}
        for k, layer in enumerate(self.encoder_layers):
            out[f"encoder.{k}.weight"] = layer.weight
            out[f"encoder.{k}.gamma"] = layer.gamma
            out[f"encoder.{k}.beta"] = layer.beta
        out.update({"decoder.w1": self.dec_w1, "decoder.b1": self.dec_b1,
                    "decoder.w2": self.dec_w2, "decoder.b2": self.dec_b2})
        return out

    def encoder_weight_tensors(self) -> list[Tensor]:
        return [layer.weight for layer in self.encoder_layers]

    def snapshot(self) -> dict:
        state = {name: t.data.copy() for name, t in self.all_tensors().items()}
        for k, layer in enumerate(self.encoder_layers):
            state[f"encoder.{k}.running_mean"] = layer.bn_state.running_mean.copy()
            state[f"encoder.{k}.running_var"] = layer.bn_state.running_var.copy()
        return state

    def restore(self, state: dict) -> None:
        for name, t in self.all_tensors().items():
            t.data = state[name].copy()
        for k, layer in enumerate(self.encoder_layers):
            layer.bn_state.running_mean = state[f"encoder.{k}.running_mean"].copy()
            layer.bn_state.running_var = state[f"encoder.{k}.running_var"].copy()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(config, in_dim: int, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit/zero batchnorm scales."""
    hidden, out = config.hidden_dim, config.out_dim
    k = config.num_layers
    dims = [in_dim] + [hidden] * (k - 1) + [out]
    if min(dims) <= 0:
        raise ValueError("layer dimensions must be positive")
    layers = []
    for i in range(k):
        layers.append(EncoderLayer(
            weight=Tensor(glorot(rng, dims[i], dims[i + 1]), requires_grad=True),
            gamma=Tensor(np.ones((1, dims[i + 1])), requires_grad=True),
            beta=Tensor(np.zeros((1, dims[i + 1])), requires_grad=True),
            bn_state=BatchNormState(dims[i + 1]),
        ))
    dec_hidden = config.decoder_hidden
    return ModelParams(
        encoder_layers=layers,
        dec_w1=Tensor(glorot(rng, out, dec_hidden), requires_grad=True),
        dec_b1=Tensor(np.zeros((1, dec_hidden)), requires_grad=True),
        dec_w2=Tensor(glorot(rng, dec_hidden, 1), requires_grad=True),
        dec_b2=Tensor(np.zeros((1, 1)), requires_grad=True),
        dims=(in_dim, hidden, out),
        dropout_rates=(config.encoder_dropout, config.decoder_dropout),
    )


def normalize_propagation(adj: SparseMatrix) -> SparseMatrix:
    """Degree-normalize a weighted adjacency: D_r^{-1/2} A D_c^{-1/2}.

    Row and column sum diagonals generalize the usual GCN normalization
    to asymmetric weights; for a symmetric matrix this reduces to it
    exactly.  Zero rows/columns stay zero.
    """
    if np.any(adj.values < 0):
        raise ValueError("adjacency entries must be non-negative")
    rs = adj.row_sums()
    cs = adj.col_sums()
    with np.errstate(divide="ignore"):
        rinv = np.where(rs > 0, 1.0 / np.sqrt(rs), 0.0)
        cinv = np.where(cs > 0, 1.0 / np.sqrt(cs), 0.0)
    rows = np.repeat(np.arange(adj.shape[0]), np.diff(adj.row_offsets))
    return adj.with_values(adj.values * rinv[rows] * cinv[adj.col_indices])


def layer_propagations(graph: Graph, masks, num_layers: int) -> list[SparseMatrix]:
    """Normalized propagation matrices per layer (unmasked when masks is None)."""
    if masks is None:
        g = normalize_propagation(masking.adjacency_with_loops(graph))
        return [g] * num_layers
    if 1 < masks.num_layers < num_layers:
        raise ValueError(f"mask set has {masks.num_layers} layers, need {num_layers}")
    mats = []
    for k in range(num_layers):
        layer = masks.layers[k if masks.num_layers >= num_layers else 0]
        mats.append(normalize_propagation(masking.perturbed_adjacency(graph, layer)))
    return mats


def encode(graph: Graph, masks, params: ModelParams, train_mode: bool,
           rng: np.random.Generator | None = None) -> list[Tensor]:
    """Run the encoder; returns every layer's representations Z^(1..K).

    Train mode applies dropout and batch statistics; eval mode runs on
    the unmasked self-looped adjacency with running statistics.
    """
    props = layer_propagations(graph, masks if train_mode else None, params.num_layers)
    enc_rate = params.dropout_rates[0]
    z = Tensor(graph.features)
    outputs = []
    for layer, g in zip(params.encoder_layers, props):
        h = dropout(z, enc_rate, rng, train_mode)
        h = matmul(spmm(g, h), layer.weight)
        h = batchnorm(h, layer.gamma, layer.beta, layer.bn_state, train_mode, BN_MOMENTUM)
        z = elu(h)
        outputs.append(z)
    return outputs


def decode_edge_scores(z: Tensor, edges: np.ndarray, params: ModelParams,
                       train_mode: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Per-pair scores sigmoid(MLP(z_i * z_j)), one column per edge list row."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    zi = gather_rows(z, edges[:, 0])
    zj = gather_rows(z, edges[:, 1])
    h = multiply(zi, zj)
    h = elu(add_bias(matmul(h, params.dec_w1), params.dec_b1))
    h = dropout(h, params.dropout_rates[1], rng, train_mode)
    return sigmoid(add_bias(matmul(h, params.dec_w2), params.dec_b2))


# ---------------------------------------------------------------------------
# checkpoint (de)serialization
# ---------------------------------------------------------------------------

def params_to_dict(params: ModelParams) -> dict:
    payload = {"dims": list(params.dims),
               "dropout_rates": list(params.dropout_rates),
               "tensors": {}}
    state = params.snapshot()
    for name, arr in state.items():
        payload["tensors"][name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    return payload


def params_from_dict(payload: dict) -> ModelParams:
    tensors = {name: np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"])
               for name, spec in payload["tensors"].items()}
    layers = []
    k = 0
    while f"encoder.{k}.weight" in tensors:
        dim = tensors[f"encoder.{k}.weight"].shape[1]
        st = BatchNormState(dim)
        st.running_mean = tensors[f"encoder.{k}.running_mean"].ravel()
        st.running_var = tensors[f"encoder.{k}.running_var"].ravel()
        layers.append(EncoderLayer(
            weight=Tensor(tensors[f"encoder.{k}.weight"], requires_grad=True),
            gamma=Tensor(tensors[f"encoder.{k}.gamma"], requires_grad=True),
            beta=Tensor(tensors[f"encoder.{k}.beta"], requires_grad=True),
            bn_state=st))
        k += 1
    def _tensor(name, shape):
        if name in tensors:
            return Tensor(tensors[name], requires_grad=True)
        return Tensor(np.zeros(shape))  # tolerate deleted decoders in probing
    out_dim = payload["dims"][2]
    dec_w1 = _tensor("decoder.w1", (out_dim, 1))
    dec_b1 = _tensor("decoder.b1", (1, dec_w1.shape[1]))
    dec_w2 = _tensor("decoder.w2", (dec_w1.shape[1], 1))
    dec_b2 = _tensor("decoder.b2", (1, 1))
    return ModelParams(layers, dec_w1, dec_b1, dec_w2, dec_b2,
                       tuple(payload["dims"]), tuple(payload["dropout_rates"]))
