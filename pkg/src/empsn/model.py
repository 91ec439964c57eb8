"""E(n) equivariant message passing over simplicial complexes.

One layer, for every wired relation A (boundary, coboundary or upper between
two dimensions)::

    m_{sigma,tau} = phi_A([h_sigma, h_tau, Inv(sigma, tau)])       (Linear-Swish-Linear-Swish)
    m_sigma^A     = sum_tau sigmoid(Linear(m_{sigma,tau})) * m_{sigma,tau}
    h'_sigma      = h_sigma + phi_f([h_sigma, m^B, m^C, m^U])       (Linear-Swish-Linear)

and, for the equivariant variant, node positions move along the node-node
message directions::

    v_i  = phi_v(h_i) v_i^init + 1/deg_i sum_j (x_i - x_j) phi_x(m_ij)
    x'_i = x_i + v_i                     (without velocities: x'_i = x_i + the sum term)

Invariants are recomputed from the moved positions at every layer; the
complex itself stays fixed. The invariant variant (IMPSN) skips the position
update so its outputs are E(n) invariant.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import complex as cx
from .errors import InvalidInputError, UsageError
from .invariants import batched_invariants, compile_plan, layout_width
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.layers import Linear, Mlp2, ParameterStore, fourier_features, gaussian_frequencies

# Communication is added in this order; an (a-b) model wires every entry up to (a, b).
COMM_ORDER = ((0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 3), (3, 3))


def wired_relations(comm_type: tuple[int, int]) -> list[tuple[str, int, int]]:
    comm_type = tuple(comm_type)
    if comm_type not in COMM_ORDER:
        raise InvalidInputError(f"unknown communication type {comm_type}")
    out = []
    for a, b in COMM_ORDER[: COMM_ORDER.index(comm_type) + 1]:
        if a == b:
            out.append(("upper", a, a))
        else:
            out.append(("boundary", a, b))
            out.append(("coboundary", b, a))
    return out


@dataclass
class EmpsnConfig:
    max_dim: int = 2
    comm_type: tuple[int, int] = (1, 2)
    hidden_dim: int = 32
    num_layers: int = 4
    node_feature_dim: int = 1
    out_dim: int = 1
    task: str = "graph"                 # "graph" (readout) or "nbody" (final positions)
    delta: float | None = None          # None: fully connected complex
    augment_fc_edges: bool = False
    update_positions: bool = True       # False: IMPSN
    use_velocity: bool = False
    geometry_ablation: bool = False
    fourier: bool = False
    fourier_scale: float = 1.0
    fourier_features: int = 16
    batch_norm: bool = False
    relift: bool = False
    seed: int = 0

    def __post_init__(self):
        self.comm_type = tuple(int(c) for c in self.comm_type)
        a, b = self.comm_type
        if not (0 <= a <= b <= self.max_dim):
            raise InvalidInputError(f"comm_type {self.comm_type} needs a <= b <= max_dim={self.max_dim}")
        if self.comm_type not in COMM_ORDER:
            raise InvalidInputError(f"unknown communication type {self.comm_type}")
        if self.hidden_dim < 1 or self.num_layers < 1:
            raise InvalidInputError("hidden_dim and num_layers must be >= 1")
        if self.task not in ("graph", "nbody"):
            raise InvalidInputError(f"unknown task {self.task!r}")
        if self.task == "nbody" and not self.update_positions:
            raise InvalidInputError("the trajectory task needs position updates")
        if self.use_velocity and not self.update_positions:
            raise InvalidInputError("velocities are only used by the position update")
        if self.relift and self.delta is None:
            raise InvalidInputError("relift needs a finite delta")

    @property
    def active_dims(self) -> list[int]:
        return list(range(self.comm_type[1] + 1))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "EmpsnConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "EmpsnConfig":
        return cls.from_dict(json.loads(text))


# batching --------------------------------------------------------------------

def lift(positions, config: EmpsnConfig) -> cx.SimplicialComplex:
    pts = np.asarray(positions, dtype=np.float64)
    if config.delta is None:
        K = cx.fully_connected(pts, config.max_dim)
    else:
        K = cx.vietoris_rips(pts, config.delta, config.max_dim)
    if config.augment_fc_edges:
        K = cx.augment_fully_connected_edges(K)
    return K


@dataclass
class GraphBatch:
    """Several complexes glued into one disjoint complex, plus everything the model reads."""

    complex: cx.SimplicialComplex
    node_features: np.ndarray
    velocities: np.ndarray | None
    graph_of: list[np.ndarray]          # per dimension: graph index of each simplex
    num_graphs: int
    relations: dict = field(default_factory=dict)
    plan: object = None
    node_offsets: np.ndarray | None = None

    @property
    def positions(self) -> np.ndarray:
        return self.complex.positions

    def count(self, dim: int) -> int:
        return self.complex.count(dim)

    def initial_features(self, dim: int) -> np.ndarray:
        """Node features at dim 0; mean of the vertices' node features above."""
        verts = self.complex.simplices[dim]
        return self.node_features[verts].mean(axis=1)


def collate(complexes, node_features, relations, velocities=None) -> GraphBatch:
    """Glue complexes (with positions) into one batch and index the wired relations."""
    complexes = list(complexes)
    if not complexes:
        raise InvalidInputError("cannot collate an empty batch")
    top = max(len(K.simplices) for K in complexes)
    offsets = np.cumsum([0] + [K.num_vertices for K in complexes])
    simplices, graph_of = [], []
    for d in range(top):
        parts, owners = [], []
        for g, K in enumerate(complexes):
            s = K.simplices[d] if d < len(K.simplices) else np.zeros((0, d + 1), dtype=np.int64)
            parts.append(s + offsets[g])
            owners.append(np.full(len(s), g, dtype=np.int64))
        simplices.append(np.concatenate(parts).astype(np.int64))
        graph_of.append(np.concatenate(owners))
    positions = np.concatenate([K.positions for K in complexes])
    K = cx.SimplicialComplex(tuple(simplices), positions)
    feats = np.concatenate([np.asarray(f, dtype=np.float64).reshape(c.num_vertices, -1)
                            for f, c in zip(node_features, complexes)])
    vel = None
    if velocities is not None:
        vel = np.concatenate([np.asarray(v, dtype=np.float64) for v in velocities])
    keys = [r for r in relations if max(r[1], r[2]) < top]
    adj = cx.build_adjacency(K, {k for k, _, _ in keys}, {(s, r) for _, s, r in keys})
    adj = {k: adj[k] for k in keys if k in adj}
    return GraphBatch(K, feats, vel, graph_of, len(complexes), adj, compile_plan(K, adj), offsets)


# model -------------------------------------------------------------------------

class EmpsnModel:
    def __init__(self, config: EmpsnConfig):
        self.config = c = config
        self.store = ParameterStore()
        rng = np.random.default_rng(c.seed)
        H = c.hidden_dim
        self.relations = wired_relations(c.comm_type)
        self.embed = {d: Linear(self.store, f"embed.{d}", c.node_feature_dim, H, rng)
                      for d in c.active_dims}
        self.frequencies = {}
        inv_width = {}
        for key in self.relations:
            width = layout_width(*key, velocities=c.use_velocity)
            if c.fourier:
                name = "fourier." + _key_name(key)
                self.frequencies[key] = self.store.add_buffer(
                    name, gaussian_frequencies(rng, width, c.fourier_features, c.fourier_scale))
                width = 2 * c.fourier_features
            inv_width[key] = width
        self.messages, self.gates, self.updates = [], [], []
        self.phi_x, self.phi_v = [], []
        for layer in range(c.num_layers):
            self.messages.append({
                key: Mlp2(self.store, f"layer{layer}.msg.{_key_name(key)}", 2 * H + inv_width[key], H, H,
                          rng, final_activation=True, batch_norm=c.batch_norm)
                for key in self.relations})
            self.gates.append({key: Linear(self.store, f"layer{layer}.gate.{_key_name(key)}", H, 1, rng)
                               for key in self.relations})
            self.updates.append({d: Mlp2(self.store, f"layer{layer}.update.{d}", 4 * H, H, H, rng,
                                         batch_norm=c.batch_norm)
                                 for d in c.active_dims})
            if c.update_positions:
                self.phi_x.append(Mlp2(self.store, f"layer{layer}.phi_x", H, H, 1, rng))
                if c.use_velocity:
                    self.phi_v.append(Mlp2(self.store, f"layer{layer}.phi_v", H, H, 1, rng))
        if c.task == "graph":
            self.readout_pre = {d: Mlp2(self.store, f"readout.pre.{d}", H, H, H, rng)
                                for d in c.active_dims}
            self.readout_post = Mlp2(self.store, "readout.post", (c.max_dim + 1) * H, H, c.out_dim, rng)

    # pieces -------------------------------------------------------------------

    def num_parameters(self) -> int:
        return self.store.num_parameters()

    def prepare(self, positions_list, node_features_list, velocities_list=None) -> GraphBatch:
        complexes = [lift(p, self.config) for p in positions_list]
        return collate(complexes, node_features_list, self.relations, velocities_list)

    def embed_features(self, batch: GraphBatch) -> dict[int, Tensor]:
        return {d: self.embed[d](batch.initial_features(d)) for d in self.config.active_dims}

    def invariants(self, X: Tensor, batch: GraphBatch) -> dict:
        c = self.config
        if c.geometry_ablation:
            out = {}
            for key, rel in batch.plan.relations.items():
                out[key] = Tensor(np.zeros((len(rel.b), layout_width(*key, velocities=c.use_velocity))))
            return out
        vel = batch.velocities if c.use_velocity else None
        return batched_invariants(X, batch.plan, vel)

    def message(self, layer: int, key, h_receiver, h_sender, inv, train: bool = False) -> Tensor:
        if self.config.fourier:
            inv = fourier_features(inv, self.frequencies[key])
        return self.messages[layer][key](ad.concat([h_receiver, h_sender, inv], axis=1), train)

    def gate_and_aggregate(self, layer: int, key, messages: Tensor, receivers, num_receivers: int) -> Tensor:
        gate = ad.sigmoid(self.gates[layer][key](messages))
        return ad.segment_sum(gate * messages, receivers, num_receivers)

    def update(self, layer: int, dim: int, h: Tensor, aggregated: dict, train: bool = False) -> Tensor:
        H = self.config.hidden_dim
        zeros = Tensor(np.zeros((h.shape[0], H)))
        parts = [h,
                 aggregated.get(("boundary", dim - 1, dim), zeros),
                 aggregated.get(("coboundary", dim + 1, dim), zeros),
                 aggregated.get(("upper", dim, dim), zeros)]
        return h + self.updates[layer][dim](ad.concat(parts, axis=1), train)

    def update_positions(self, layer: int, X: Tensor, h_nodes: Tensor, node_messages: Tensor,
                         batch: GraphBatch) -> Tensor:
        c = self.config
        if not c.update_positions:
            raise UsageError("position updates are disabled for invariant (IMPSN) models")
        rel = batch.relations[("upper", 0, 0)]
        n = X.shape[0]
        weight = self.phi_x[layer](node_messages)
        diff = ad.take_rows(X, rel.receivers) - ad.take_rows(X, rel.senders)
        degree = np.bincount(rel.receivers, minlength=n).astype(np.float64)
        scale = np.where(degree > 0, 1.0 / np.maximum(degree, 1.0), 0.0)[:, None]
        shift = ad.segment_sum(diff * weight, rel.receivers, n) * scale
        if c.use_velocity:
            shift = self.phi_v[layer](h_nodes) * batch.velocities + shift
        return X + shift

    def readout(self, h: dict, batch: GraphBatch) -> Tensor:
        c = self.config
        blocks = []
        for d in range(c.max_dim + 1):
            if d in h and batch.count(d):
                z = self.readout_pre[d](h[d])
                blocks.append(ad.segment_sum(z, batch.graph_of[d], batch.num_graphs))
            else:
                blocks.append(Tensor(np.zeros((batch.num_graphs, c.hidden_dim))))
        return self.readout_post(ad.concat(blocks, axis=1))

    # full pass -------------------------------------------------------------------

    def forward(self, batch: GraphBatch, train: bool = False, positions: Tensor | None = None) -> dict:
        """Returns {"prediction": graph outputs or None, "positions": final node positions}."""
        c = self.config
        X = positions if positions is not None else Tensor(batch.positions)
        h = self.embed_features(batch)
        inv = self.invariants(X, batch)
        for layer in range(c.num_layers):
            aggregated, node_messages = {}, None
            for key, rel in batch.relations.items():
                _, sd, rd = key
                if len(rel) == 0:
                    continue
                m = self.message(layer, key, ad.take_rows(h[rd], rel.receivers),
                                 ad.take_rows(h[sd], rel.senders), inv[key], train)
                if key == ("upper", 0, 0):
                    node_messages = m
                aggregated[key] = self.gate_and_aggregate(layer, key, m, rel.receivers, batch.count(rd))
            h_new = {d: self.update(layer, d, h[d], aggregated, train) for d in h}
            if c.update_positions:
                if node_messages is not None:
                    X = self.update_positions(layer, X, h[0], node_messages, batch)
                elif c.use_velocity:
                    X = X + self.phi_v[layer](h[0]) * batch.velocities
                if c.relift and layer + 1 < c.num_layers:
                    batch, h_new = self._relift(batch, X, h_new)
                if layer + 1 < c.num_layers:
                    inv = self.invariants(X, batch)
            h = h_new
        prediction = self.readout(h, batch) if c.task == "graph" else None
        return {"prediction": prediction, "positions": X, "features": h}

    def _relift(self, batch: GraphBatch, X: Tensor, h: dict) -> tuple[GraphBatch, dict]:
        """Rebuild the complex from moved positions, keeping features of surviving simplices.

        New simplices start from the embedding of their initial features.
        """
        offsets = batch.node_offsets
        complexes = []
        for g in range(batch.num_graphs):
            pts = X.data[offsets[g]:offsets[g + 1]]
            complexes.append(lift(pts, self.config))
        feats = [batch.node_features[offsets[g]:offsets[g + 1]] for g in range(batch.num_graphs)]
        vel = None
        if batch.velocities is not None:
            vel = [batch.velocities[offsets[g]:offsets[g + 1]] for g in range(batch.num_graphs)]
        new = collate(complexes, feats, self.relations, vel)
        fresh = self.embed_features(new)
        out = {0: h[0]}
        for d in h:
            if d == 0:
                continue
            old_rows = {tuple(r): i for i, r in enumerate(batch.complex.simplices[d].tolist())}
            take_old, take_new, pos_old = [], [], []
            for i, r in enumerate(new.complex.simplices[d].tolist()):
                j = old_rows.get(tuple(r))
                if j is None:
                    take_new.append(i)
                else:
                    take_old.append(j)
                    pos_old.append(i)
            n = new.count(d)
            order = np.argsort(np.array(pos_old + take_new, dtype=np.int64), kind="stable")
            parts = ad.concat([ad.take_rows(h[d], np.array(take_old, dtype=np.int64)),
                               ad.take_rows(fresh[d], np.array(take_new, dtype=np.int64))], axis=0)
            out[d] = ad.take_rows(parts, order) if n else Tensor(np.zeros((0, self.config.hidden_dim)))
        return new, out

    def __call__(self, batch: GraphBatch, train: bool = False) -> dict:
        return self.forward(batch, train)

    # persistence ---------------------------------------------------------------

    def state(self) -> dict[str, np.ndarray]:
        return self.store.state_arrays()

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        self.store.load_state_arrays(arrays)


def _key_name(key) -> str:
    kind, s, r = key
    return f"{kind}{s}{r}"
