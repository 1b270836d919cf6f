"""Permutation-invariant Gaussian policy/value networks, trained from scratch.

Architecture: two per-element set encoders (one per team) with a single
hidden layer each, summed into fixed-size embeddings, then an outer network
with a single hidden layer producing a diagonal Gaussian head (mean and a
softplus-parameterized std per output). Everything is plain numpy with
hand-derived gradients; there is no autodiff dependency.

Set rows are put into canonical (lexicographic) order before pooling so the
output is invariant bit-for-bit under any permutation of the input sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RELU = "relu"
STD_FLOOR = 1e-4


@dataclass(frozen=True)
class ArchSpec:
    """Shape descriptor for one network; fully determines the parameter layout."""

    self_dim: int
    set_dim: int
    out_dim: int
    has_count: bool = False
    hidden: int = 16
    embed: int = 16

    @property
    def outer_in(self) -> int:
        return self.self_dim + 2 * self.embed + (1 if self.has_count else 0)

    @property
    def shapes(self) -> tuple:
        """Canonical parameter order: inner_a, inner_b, outer; layer-major, row-major."""
        h, e, d = self.hidden, self.embed, self.set_dim
        inner = [(h, d), (h,), (e, h), (e,)]
        outer = [(self.hidden, self.outer_in), (self.hidden,),
                 (2 * self.out_dim, self.hidden), (2 * self.out_dim,)]
        return tuple(inner + inner + outer)

    @property
    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes)

    def to_json(self) -> dict:
        return {"self_dim": self.self_dim, "set_dim": self.set_dim,
                "out_dim": self.out_dim, "has_count": self.has_count,
                "hidden": self.hidden, "embed": self.embed}

    @classmethod
    def from_json(cls, d: dict) -> "ArchSpec":
        return cls(**d)


def policy_arch(state_dim: int, action_dim: int) -> ArchSpec:
    return ArchSpec(self_dim=state_dim, set_dim=state_dim, out_dim=action_dim)


def value_arch(state_dim: int) -> ArchSpec:
    return ArchSpec(self_dim=0, set_dim=state_dim, out_dim=1, has_count=True)


class NetworkParameters:
    """Flat float64 parameter store plus named views into it.

    The views alias the flat vector, so in-place updates of `theta` (as done
    by `train`) are immediately visible through them. Replacing the buffer
    would orphan the views; don't.
    """

    def __init__(self, arch: ArchSpec, theta: np.ndarray):
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (arch.param_count,):
            raise ValueError(f"expected {arch.param_count} parameters, got {theta.shape}")
        self.arch = arch
        self.theta = theta
        views = []
        off = 0
        for shape in arch.shapes:
            size = int(np.prod(shape))
            views.append(theta[off:off + size].reshape(shape))
            off += size
        (self.w1a, self.b1a, self.w2a, self.b2a,
         self.w1b, self.b1b, self.w2b, self.b2b,
         self.v1, self.c1, self.v2, self.c2) = views

    def copy(self) -> "NetworkParameters":
        return NetworkParameters(self.arch, self.theta.copy())

    def __reduce__(self):
        # rebuild the views on unpickle instead of pickling aliased arrays
        return (NetworkParameters, (self.arch, self.theta))


def init_params(arch: ArchSpec, seed: int) -> NetworkParameters:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for shape in arch.shapes:
        if len(shape) == 2:
            fan_out, fan_in = shape
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-lim, lim, size=fan_out * fan_in))
        else:
            chunks.append(np.zeros(shape[0]))
    return NetworkParameters(arch, np.concatenate(chunks))


@dataclass
class GaussianOutput:
    mean: np.ndarray
    std: np.ndarray


@dataclass
class SetInput:
    """One network input: optional self features, two sets, optional scalar count."""

    self_features: np.ndarray | None
    set_a: np.ndarray
    set_b: np.ndarray
    count: float | None = None


@dataclass
class TrainingSample:
    input: SetInput
    target: np.ndarray


def policy_input(obs) -> SetInput:
    """Adapt a game Observation to a policy-network input."""
    return SetInput(obs.goal_relative, obs.neighbors_a, obs.neighbors_b, None)


def value_input(vobs) -> SetInput:
    """Adapt a game ValueObservation to a value-network input."""
    return SetInput(None, vobs.set_a, vobs.set_b, float(vobs.reached_count))


def canonical_order(rows: np.ndarray) -> np.ndarray:
    """Sort set rows lexicographically; permutation-invariant pooling order."""
    if rows.shape[0] <= 1:
        return rows
    return rows[np.lexsort(rows.T[::-1])]


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _pool(rows, w1, b1, w2, b2, embed):
    """Sum of per-element encodings; empty set pools to the zero embedding."""
    if rows.shape[0] == 0:
        return np.zeros(embed)
    z = canonical_order(rows) @ w1.T + b1
    r = np.maximum(z, 0.0)
    return np.sum(r @ w2.T, axis=0) + rows.shape[0] * b2


def forward(params: NetworkParameters, inp: SetInput) -> GaussianOutput:
    """Evaluate one input; output is bit-identical under within-set permutations."""
    a = params.arch
    ea = _pool(np.asarray(inp.set_a, float).reshape(-1, a.set_dim),
               params.w1a, params.b1a, params.w2a, params.b2a, a.embed)
    eb = _pool(np.asarray(inp.set_b, float).reshape(-1, a.set_dim),
               params.w1b, params.b1b, params.w2b, params.b2b, a.embed)
    parts = []
    if a.self_dim:
        sf = np.asarray(inp.self_features, float)
        if sf.shape != (a.self_dim,):
            raise ValueError(f"expected self features of dim {a.self_dim}, got {sf.shape}")
        parts.append(sf)
    parts += [ea, eb]
    if a.has_count:
        parts.append(np.array([0.0 if inp.count is None else float(inp.count)]))
    x = np.concatenate(parts)
    h = np.maximum(x @ params.v1.T + params.c1, 0.0)
    o = h @ params.v2.T + params.c2
    mean = o[: a.out_dim]
    std = _softplus(o[a.out_dim:]) + STD_FLOOR
    return GaussianOutput(mean, std)


def sample(out: GaussianOutput, eps: np.ndarray) -> np.ndarray:
    """Reparameterized draw mean + std*eps; the caller projects into the action set."""
    eps = np.asarray(eps, float)
    if eps.shape != out.mean.shape:
        raise ValueError("noise dimension must match the output dimension")
    return out.mean + out.std * eps


def nll_loss(out: GaussianOutput, target) -> float:
    """Gaussian fit loss: squared residual over the variance plus half log-det."""
    r = np.asarray(target, float) - out.mean
    return float(np.sum(r * r / (out.std * out.std)) + np.sum(np.log(out.std)))


# ---------------------------------------------------------------------------
# batched training path (padded sets)
# ---------------------------------------------------------------------------

@dataclass
class PaddedBatch:
    """Dataset padded to rectangular tensors; rows already in canonical order."""

    self_features: np.ndarray | None   # (B, self_dim)
    set_a: np.ndarray                  # (B, Ka, set_dim)
    mask_a: np.ndarray                 # (B, Ka) float 0/1
    set_b: np.ndarray
    mask_b: np.ndarray
    counts: np.ndarray | None          # (B, 1)
    targets: np.ndarray                # (B, out_dim)

    @property
    def size(self) -> int:
        return self.targets.shape[0]

    def subset(self, idx) -> "PaddedBatch":
        return PaddedBatch(
            None if self.self_features is None else self.self_features[idx],
            self.set_a[idx], self.mask_a[idx], self.set_b[idx], self.mask_b[idx],
            None if self.counts is None else self.counts[idx],
            self.targets[idx])


def pad_samples(samples: list[TrainingSample], arch: ArchSpec) -> PaddedBatch:
    n = len(samples)
    ka = max((s.input.set_a.shape[0] for s in samples), default=0)
    kb = max((s.input.set_b.shape[0] for s in samples), default=0)
    ka, kb = max(ka, 1), max(kb, 1)
    set_a = np.zeros((n, ka, arch.set_dim))
    set_b = np.zeros((n, kb, arch.set_dim))
    mask_a = np.zeros((n, ka))
    mask_b = np.zeros((n, kb))
    self_f = np.zeros((n, arch.self_dim)) if arch.self_dim else None
    counts = np.zeros((n, 1)) if arch.has_count else None
    targets = np.zeros((n, arch.out_dim))
    for i, s in enumerate(samples):
        na = s.input.set_a.shape[0]
        nb = s.input.set_b.shape[0]
        if na:
            set_a[i, :na] = canonical_order(np.asarray(s.input.set_a, float))
            mask_a[i, :na] = 1.0
        if nb:
            set_b[i, :nb] = canonical_order(np.asarray(s.input.set_b, float))
            mask_b[i, :nb] = 1.0
        if self_f is not None:
            self_f[i] = s.input.self_features
        if counts is not None:
            counts[i, 0] = 0.0 if s.input.count is None else float(s.input.count)
        targets[i] = s.target
    return PaddedBatch(self_f, set_a, mask_a, set_b, mask_b, counts, targets)


def _forward_batch(params: NetworkParameters, pb: PaddedBatch):
    a = params.arch
    za = pb.set_a @ params.w1a.T + params.b1a            # (B, Ka, h)
    ra = np.maximum(za, 0.0) * pb.mask_a[..., None]
    sa = ra.sum(axis=1)                                  # (B, h)
    na = pb.mask_a.sum(axis=1, keepdims=True)
    ea = sa @ params.w2a.T + na * params.b2a             # (B, e)
    zb = pb.set_b @ params.w1b.T + params.b1b
    rb = np.maximum(zb, 0.0) * pb.mask_b[..., None]
    sb = rb.sum(axis=1)
    nb = pb.mask_b.sum(axis=1, keepdims=True)
    eb = sb @ params.w2b.T + nb * params.b2b
    parts = []
    if pb.self_features is not None:
        parts.append(pb.self_features)
    parts += [ea, eb]
    if pb.counts is not None:
        parts.append(pb.counts)
    x = np.concatenate(parts, axis=1)                    # (B, outer_in)
    zo = x @ params.v1.T + params.c1
    h = np.maximum(zo, 0.0)
    o = h @ params.v2.T + params.c2
    mean = o[:, : a.out_dim]
    raw = o[:, a.out_dim:]
    std = _softplus(raw) + STD_FLOOR
    cache = (za, sa, na, zb, sb, nb, x, zo, h, raw)
    return mean, std, cache


def batch_loss(params: NetworkParameters, pb: PaddedBatch) -> float:
    """Mean per-sample Gaussian fit loss over the batch."""
    mean, std, _ = _forward_batch(params, pb)
    r = pb.targets - mean
    per = np.sum(r * r / (std * std) + np.log(std), axis=1)
    return float(per.mean())


def gradient(params: NetworkParameters, pb: PaddedBatch) -> tuple[np.ndarray, float]:
    """Exact gradient of `batch_loss` w.r.t. every parameter (flat) plus the loss."""
    if pb.size == 0:
        raise ValueError("gradient of an empty batch")
    a = params.arch
    mean, std, cache = _forward_batch(params, pb)
    za, sa, na, zb, sb, nb, x, zo, h, raw = cache
    B = pb.size
    r = pb.targets - mean
    loss = float(np.sum(r * r / (std * std) + np.log(std)) / B)
    dmean = -2.0 * r / (std * std)
    dstd = -2.0 * r * r / (std ** 3) + 1.0 / std
    draw = dstd * _sigmoid(raw)
    do = np.concatenate([dmean, draw], axis=1)           # (B, 2*out)
    g_v2 = do.T @ h
    g_c2 = do.sum(axis=0)
    dh = do @ params.v2
    dzo = dh * (zo > 0)
    g_v1 = dzo.T @ x
    g_c1 = dzo.sum(axis=0)
    dx = dzo @ params.v1                                 # (B, outer_in)
    off = a.self_dim
    dea = dx[:, off:off + a.embed]
    deb = dx[:, off + a.embed:off + 2 * a.embed]

    def inner_grads(d_embed, rows, mask, z, s, n, w1, w2):
        g_w2 = d_embed.T @ s
        g_b2 = (d_embed * n).sum(axis=0)
        ds = d_embed @ w2                                # (B, h)
        dz = ds[:, None, :] * (z > 0) * mask[..., None]  # (B, K, h)
        g_w1 = np.einsum("bkh,bkd->hd", dz, rows)
        g_b1 = dz.sum(axis=(0, 1))
        return g_w1, g_b1, g_w2, g_b2

    ga = inner_grads(dea, pb.set_a, pb.mask_a, za, sa, na, params.w1a, params.w2a)
    gb = inner_grads(deb, pb.set_b, pb.mask_b, zb, sb, nb, params.w1b, params.w2b)
    flat = np.concatenate([g.ravel() for g in
                           (*ga, *gb, g_v1, g_c1, g_v2, g_c2)]) / B
    return flat, loss


@dataclass
class TrainResult:
    params: NetworkParameters
    trace: list    # per-epoch mean train loss


def train(params: NetworkParameters, data, epochs: int, batch_size: int,
          learning_rate: float, momentum: float, seed: int) -> TrainResult:
    """Shuffled minibatch SGD with classical momentum.

    `data` is a list of TrainingSample or an already-padded PaddedBatch.
    Returns fresh parameters (the input is not mutated) and the per-epoch
    loss trace; epochs=0 returns an identical copy.
    """
    pb = data if isinstance(data, PaddedBatch) else pad_samples(data, params.arch)
    if pb.size == 0:
        raise ValueError("train requires a nonempty dataset")
    out = params.copy()
    vel = np.zeros_like(out.theta)
    rng = np.random.default_rng(seed)
    trace = []
    for _ in range(epochs):
        order = rng.permutation(pb.size)
        total, count = 0.0, 0
        for lo in range(0, pb.size, batch_size):
            idx = order[lo:lo + batch_size]
            g, loss = gradient(out, pb.subset(idx))
            vel *= momentum
            vel -= learning_rate * g
            out.theta += vel
            total += loss * len(idx)
            count += len(idx)
        trace.append(total / count)
    return TrainResult(out, trace)
