"""Minimal reverse-mode automatic differentiation over 2-D float64 arrays.

Just enough machinery for small dense networks with masked-softmax
policy heads and sum-aggregation message passing: no GPU, no shapes
beyond matrices, double precision throughout so gradient checks against
central finite differences are meaningful at 1e-4 relative tolerance.
"""

from __future__ import annotations

import json
import struct

import numpy as np


class Tensor2:
    """A matrix node in the computation graph."""

    __slots__ = ("values", "grad", "_parents", "_backward", "requires_grad", "name")

    def __init__(self, values, parents=(), backward=None, requires_grad=False, name=None):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"Tensor2 needs a 2-D array, got shape {self.values.shape}")
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or backward is not None
        self.name = name

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def backward(self):
        """Reverse-mode sweep from a 1x1 loss node."""
        if self.values.shape != (1, 1):
            raise ValueError("backward() expects a scalar (1x1) loss")
        topo: list[Tensor2] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor2, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.ones((1, 1)))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def item(self) -> float:
        return float(self.values[0, 0])


def constant(values) -> Tensor2:
    t = Tensor2(values)
    if not np.all(np.isfinite(t.values)):
        raise ValueError("Tensor2 entries must be finite")
    return t


def parameter(values, name=None) -> Tensor2:
    t = Tensor2(values, requires_grad=True, name=name)
    if not np.all(np.isfinite(t.values)):
        raise ValueError("Tensor2 entries must be finite")
    return t


def _binary(a, b, values, da, db) -> Tensor2:
    def bw(g):
        if a.requires_grad:
            a._accum(da(g))
        if b.requires_grad:
            b._accum(db(g))

    return Tensor2(values, parents=(a, b), backward=bw)


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    """Elementwise sum; b may be a 1 x n bias row broadcast over a's rows."""
    if a.values.shape == b.values.shape:
        return _binary(a, b, a.values + b.values, lambda g: g, lambda g: g)
    if b.rows == 1 and b.cols == a.cols:
        return _binary(
            a, b, a.values + b.values, lambda g: g, lambda g: g.sum(axis=0, keepdims=True)
        )
    raise ValueError(f"add: incompatible shapes {a.values.shape} and {b.values.shape}")


def sub(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.values.shape != b.values.shape:
        raise ValueError("sub: shape mismatch")
    return _binary(a, b, a.values - b.values, lambda g: g, lambda g: -g)


def mul(a: Tensor2, b) -> Tensor2:
    """Elementwise product with a Tensor2 of equal shape or a python scalar."""
    if isinstance(b, Tensor2):
        if a.values.shape != b.values.shape:
            raise ValueError("mul: shape mismatch")
        return _binary(a, b, a.values * b.values, lambda g: g * b.values, lambda g: g * a.values)
    c = float(b)

    def bw(g):
        if a.requires_grad:
            a._accum(g * c)

    return Tensor2(a.values * c, parents=(a,), backward=bw)


def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.cols != b.rows:
        raise ValueError(f"matmul: inner dimensions disagree ({a.cols} vs {b.rows})")
    return _binary(
        a, b, a.values @ b.values, lambda g: g @ b.values.T, lambda g: a.values.T @ g
    )


def _unary(a, values, da) -> Tensor2:
    def bw(g):
        if a.requires_grad:
            a._accum(da(g))

    return Tensor2(values, parents=(a,), backward=bw)


def relu(a: Tensor2) -> Tensor2:
    mask = a.values > 0
    return _unary(a, a.values * mask, lambda g: g * mask)


def tanh(a: Tensor2) -> Tensor2:
    t = np.tanh(a.values)
    return _unary(a, t, lambda g: g * (1.0 - t * t))


def exp(a: Tensor2) -> Tensor2:
    e = np.exp(a.values)
    return _unary(a, e, lambda g: g * e)


def sum_all(a: Tensor2) -> Tensor2:
    return _unary(a, [[a.values.sum()]], lambda g: np.full_like(a.values, g[0, 0]))


def add_n(terms: list[Tensor2]) -> Tensor2:
    """Sum of equally shaped tensors, accumulated in the given order.

    Callers aggregating sets must sort their terms canonically first so
    runs stay bit-for-bit reproducible.
    """
    if not terms:
        raise ValueError("add_n needs at least one term")
    total = terms[0].values.copy()
    for t in terms[1:]:
        if t.values.shape != terms[0].values.shape:
            raise ValueError("add_n: shape mismatch")
        total += t.values

    def bw(g):
        for t in terms:
            if t.requires_grad:
                t._accum(g)

    return Tensor2(total, parents=tuple(terms), backward=bw)


def concat_cols(parts: list[Tensor2]) -> Tensor2:
    """Concatenate 1 x k_i row vectors into one 1 x sum(k_i) row."""
    if not parts:
        raise ValueError("concat_cols needs at least one part")
    if any(p.rows != 1 for p in parts):
        raise ValueError("concat_cols expects row vectors")
    values = np.concatenate([p.values for p in parts], axis=1)
    spans = []
    at = 0
    for p in parts:
        spans.append((at, at + p.cols))
        at += p.cols

    def bw(g):
        for p, (lo, hi) in zip(parts, spans):
            if p.requires_grad:
                p._accum(g[:, lo:hi])

    return Tensor2(values, parents=tuple(parts), backward=bw)


def pick(a: Tensor2, col: int) -> Tensor2:
    """Extract entry (0, col) of a row vector as a 1x1 tensor."""
    if a.rows != 1:
        raise ValueError("pick expects a row vector")

    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.values)
            full[0, col] = g[0, 0]
            a._accum(full)

    return Tensor2([[a.values[0, col]]], parents=(a,), backward=bw)


def masked_log_softmax(logits: Tensor2, mask) -> Tensor2:
    """Log-probabilities over the unmasked entries of a logit row.

    Masked entries come back as 0 and receive zero gradient; unmasked
    entries are shift invariant in the logits.  At least one entry must
    be unmasked.
    """
    if logits.rows != 1:
        raise ValueError("masked_log_softmax expects a row vector")
    m = np.asarray(mask, dtype=bool).reshape(1, -1)
    if m.shape != logits.values.shape:
        raise ValueError("mask shape must match logits")
    if not m.any():
        raise ValueError("all entries are masked")
    x = logits.values
    xmax = x[m].max()
    shifted = np.where(m, x - xmax, -np.inf)
    lse = np.log(np.exp(shifted[m]).sum())
    logp = np.where(m, shifted - lse, 0.0)
    probs = np.where(m, np.exp(logp), 0.0)

    def bw(g):
        if logits.requires_grad:
            g_eff = g * m
            total = g_eff.sum()
            logits._accum(np.where(m, g_eff - probs * total, 0.0))

    return Tensor2(logp, parents=(logits,), backward=bw)


def softmax_masked(logits: Tensor2, mask) -> Tensor2:
    """Probabilities over unmasked entries; masked entries are exactly 0."""
    m = np.asarray(mask, dtype=bool).reshape(1, -1)
    logp = masked_log_softmax(logits, m)
    return mul(exp(logp), constant(m.astype(np.float64)))


def masked_entropy(logp: Tensor2, mask) -> Tensor2:
    """Entropy -sum p log p of a masked log-probability row (1x1 tensor)."""
    m = constant(np.asarray(mask, dtype=np.float64).reshape(1, -1))
    p = exp(logp)
    return mul(sum_all(mul(mul(p, logp), m)), -1.0)


# ---------------------------------------------------------------------------
# layers and parameters


def dense_forward(x: Tensor2, weight: Tensor2, bias: Tensor2, activation: str = "identity") -> Tensor2:
    """activation(x @ weight + bias); activation in {relu, tanh, identity}."""
    z = add(matmul(x, weight), bias)
    if activation == "identity":
        return z
    if activation == "relu":
        return relu(z)
    if activation == "tanh":
        return tanh(z)
    raise ValueError(f"unknown activation {activation!r}")


class ParamSet:
    """Named parameters with gradient buffers and an adaptive-moment update.

    Parameters are created lazily in a deterministic order; the
    initialization is uniform in +-sqrt(6 / (fan_in + fan_out)) from a
    dedicated stream, so equal seeds build identical networks.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 29])))
        self.tensors: dict[str, Tensor2] = {}
        self._adam_m: dict[str, np.ndarray] = {}
        self._adam_v: dict[str, np.ndarray] = {}
        self.adam_t = 0

    def param(self, name: str, rows: int, cols: int, init: str = "glorot") -> Tensor2:
        t = self.tensors.get(name)
        if t is not None:
            if t.values.shape != (rows, cols):
                raise ValueError(f"parameter {name!r} exists with another shape")
            return t
        if init == "zeros":
            values = np.zeros((rows, cols))
        elif init == "glorot":
            bound = np.sqrt(6.0 / (rows + cols))
            values = self.rng.uniform(-bound, bound, size=(rows, cols))
        else:
            raise ValueError(f"unknown init {init!r}")
        t = parameter(values, name=name)
        self.tensors[name] = t
        self._adam_m[name] = np.zeros((rows, cols))
        self._adam_v[name] = np.zeros((rows, cols))
        return t

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def grad_norm(self) -> float:
        total = 0.0
        for t in self.tensors.values():
            if t.grad is not None:
                total += float((t.grad**2).sum())
        return float(np.sqrt(total))

    def adam_step(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        """One adaptive-moment descent step on the accumulated gradients."""
        self.adam_t += 1
        b1t = 1.0 - beta1**self.adam_t
        b2t = 1.0 - beta2**self.adam_t
        for name in sorted(self.tensors):
            t = self.tensors[name]
            g = t.grad if t.grad is not None else np.zeros_like(t.values)
            m = self._adam_m[name]
            v = self._adam_v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            t.values = t.values - lr * (m / b1t) / (np.sqrt(v / b2t) + eps)
        self.zero_grad()

    # ------------------------------------------------------------------ checkpoints

    MAGIC = b"SSNN0001"

    def save(self, path, meta: dict | None = None):
        """Byte-stable checkpoint: sorted names, raw little-endian float64."""
        named: dict[str, np.ndarray] = {}
        for name, t in self.tensors.items():
            named[f"p/{name}"] = t.values
            named[f"m/{name}"] = self._adam_m[name]
            named[f"v/{name}"] = self._adam_v[name]
        named["t/adam"] = np.array([[float(self.adam_t)]])
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<I", len(named)))
            for name in sorted(named):
                arr = np.ascontiguousarray(named[name], dtype="<f8")
                nb = name.encode("utf-8")
                fh.write(struct.pack("<H", len(nb)))
                fh.write(nb)
                fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
                fh.write(arr.tobytes())
        side = {"seed": self.seed, "format": self.MAGIC.decode()}
        if meta:
            side.update(meta)
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(side, fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ParamSet":
        with open(path, "rb") as fh:
            magic = fh.read(len(cls.MAGIC))
            if magic != cls.MAGIC:
                raise ValueError(f"bad checkpoint magic {magic!r}; expected {cls.MAGIC!r}")
            (count,) = struct.unpack("<I", fh.read(4))
            named = {}
            for _ in range(count):
                (nlen,) = struct.unpack("<H", fh.read(2))
                name = fh.read(nlen).decode("utf-8")
                rows, cols = struct.unpack("<II", fh.read(8))
                buf = fh.read(rows * cols * 8)
                named[name] = np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()
        try:
            with open(str(path) + ".json", encoding="utf-8") as fh:
                seed = json.load(fh).get("seed", 0)
        except FileNotFoundError:
            seed = 0
        ps = cls(seed=seed)
        for key, arr in named.items():
            kind, _, name = key.partition("/")
            if kind == "p":
                ps.tensors[name] = parameter(arr, name=name)
            elif kind == "m":
                ps._adam_m[name] = arr
            elif kind == "v":
                ps._adam_v[name] = arr
            elif kind == "t":
                ps.adam_t = int(arr[0, 0])
        return ps


class Mlp:
    """A small fully connected stack over a ParamSet.

    ``sizes`` runs input width through hidden widths to the output width;
    hidden layers share one activation, the output layer is linear.
    """

    def __init__(self, params: ParamSet, prefix: str, sizes: list[int], activation: str = "tanh"):
        self.params = params
        self.prefix = prefix
        self.sizes = list(sizes)
        self.activation = activation
        for i, (a, b) in enumerate(zip(self.sizes, self.sizes[1:])):
            params.param(f"{prefix}/w{i}", a, b)
            params.param(f"{prefix}/b{i}", 1, b, init="zeros")

    def __call__(self, x: Tensor2) -> Tensor2:
        n = len(self.sizes) - 1
        h = x
        for i in range(n):
            act = self.activation if i < n - 1 else "identity"
            h = dense_forward(
                h,
                self.params.tensors[f"{self.prefix}/w{i}"],
                self.params.tensors[f"{self.prefix}/b{i}"],
                act,
            )
        return h


def grad_check(params: ParamSet, loss_fn, h: float = 1e-5, tol: float = 1e-4):
    """Compare analytic gradients with central finite differences.

    ``loss_fn`` must rebuild the loss graph from the current parameter
    values on every call and be deterministic.  Returns (ok, report)
    where report maps parameter name to its max relative error.
    """
    params.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.values))
        for name, t in params.tensors.items()
    }
    params.zero_grad()
    report = {}
    for name, t in params.tensors.items():
        worst = 0.0
        flat = t.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn().item()
            flat[i] = orig - h
            down = loss_fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[name].reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if err > worst:
                worst = err
        report[name] = worst
    ok = all(v < tol for v in report.values())
    return ok, report
