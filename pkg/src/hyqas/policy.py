"""Hybrid-action policy: a shared feed-forward encoder over the flattened
circuit tensors with three heads.

  * a masked categorical head over the discrete gate candidates;
  * per-candidate Gaussian heads (mu, sigma) for the initialization angle of
    a newly placed rotation, defined only for rotation candidates;
  * a Gaussian refine head of length n_step whose entries adjust the angles
    of rotations placed at earlier construction steps, gated by a delta mask.

The refine branch is conditioned on the sampled discrete action (through a
learned gate embedding) and on a learned linear projection of the angle
tensor (the gate-parameter history), so refine outputs come from a second
forward pass after the discrete choice is drawn.

Factorization: log pi(a|s) = log pi_disc + [rotation] * log N(theta) +
sum over delta-masked steps of log N(delta_i). Inactive factors contribute
exactly zero, to the log-probability and to its gradient.

Gradients are hand-derived backpropagation (checked against central finite
differences in the test suite); everything runs in float64 numpy, so results
are bit-reproducible regardless of thread count.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as _sigmoid

from .circuit import Circuit, param_action_mask

_LOG_2PI = float(np.log(2.0 * np.pi))
_GAUSS_ENTROPY_CONST = 0.5 * float(np.log(2.0 * np.pi * np.e))


def _softplus(x):
    return np.logaddexp(0.0, x)


def _log_softmax(z):
    m = np.max(z)
    shifted = z - m
    return shifted - np.log(np.sum(np.exp(shifted)))


@dataclass(frozen=True)
class PolicyConfig:
    n_qubits: int
    n_step: int
    hidden: tuple = (256, 256)
    refine_hidden: int = 128
    embed_dim: int = 16
    history_dim: int = 64
    sigma_floor: float = 1e-3
    mask_penalty: float = -1e9
    init_mu_scale: float = float(np.pi)  # init means squashed to (-pi, pi)
    delta_clip: float = float(np.pi / 2)  # refine deltas clipped at application

    @property
    def n_actions(self) -> int:
        n = self.n_qubits
        return 3 * n + n * (n - 1)

    @property
    def binary_dim(self) -> int:
        return self.n_qubits * (self.n_qubits + 3) * self.n_step

    @property
    def angles_dim(self) -> int:
        return 3 * self.n_qubits * self.n_step

    @property
    def input_dim(self) -> int:
        return self.binary_dim + self.angles_dim


@dataclass(frozen=True)
class MaskBundle:
    """illegal: 1 marks a LEGAL discrete candidate (0 = masked out);
    param: 1 marks rotation candidates; delta: 1 marks prior steps that
    placed a rotation."""

    illegal: np.ndarray
    param: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class PolicyHeads:
    logits: np.ndarray
    init_mu: np.ndarray
    init_sigma: np.ndarray
    delta_mu: np.ndarray
    delta_sigma: np.ndarray


@dataclass(frozen=True)
class HybridAction:
    disc: int
    init_angle: float | None  # present iff the discrete choice is a rotation
    deltas: np.ndarray  # length n_step, zero at delta-masked-out positions


@dataclass(frozen=True)
class LogProbParts:
    disc: float
    init: float
    delta: float

    @property
    def total(self) -> float:
        return self.disc + self.init + self.delta


def masks_for_circuit(circuit: Circuit) -> MaskBundle:
    n_actions = 3 * circuit.n_qubits + circuit.n_qubits * (circuit.n_qubits - 1)
    legal = np.ones(n_actions)
    for k in circuit.illegal_actions():
        legal[k] = 0.0
    return MaskBundle(
        illegal=legal,
        param=param_action_mask(circuit.n_qubits),
        delta=circuit.delta_mask(),
    )


class HybridPolicy:
    """Parameter container plus the forward/sample/log-prob/entropy/gradient
    machinery. Parameters live in a plain name->array dict so snapshots and
    checkpoints are trivial."""

    def __init__(self, cfg: PolicyConfig):
        self.cfg = cfg

    # -- parameters ---------------------------------------------------------

    def param_shapes(self) -> dict[str, tuple]:
        cfg = self.cfg
        h1, h2 = cfg.hidden
        a = cfg.n_actions
        r_in = h2 + cfg.embed_dim + cfg.history_dim
        return {
            "W1": (h1, cfg.input_dim), "b1": (h1,),
            "W2": (h2, h1), "b2": (h2,),
            "Wd": (a, h2), "bd": (a,),
            "Wim": (a, h2), "bim": (a,),
            "Wis": (a, h2), "bis": (a,),
            "E": (a, cfg.embed_dim),
            "P": (cfg.history_dim, cfg.angles_dim), "bp": (cfg.history_dim,),
            "Wr": (cfg.refine_hidden, r_in), "br": (cfg.refine_hidden,),
            "Wrm": (cfg.n_step, cfg.refine_hidden), "brm": (cfg.n_step,),
            "Wrs": (cfg.n_step, cfg.refine_hidden), "brs": (cfg.n_step,),
        }

    def init_params(self, rng) -> dict[str, np.ndarray]:
        """Hidden layers get 1/sqrt(fan_in) Gaussian weights; all output
        layers start at zero so the initial policy is uniform over legal
        gates with zero-mean angle distributions."""
        params = {}
        for name, shape in self.param_shapes().items():
            if name in ("W1", "W2", "Wr", "P"):
                params[name] = rng.standard_normal(shape) / np.sqrt(shape[1])
            elif name == "E":
                params[name] = 0.1 * rng.standard_normal(shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def validate_params(self, params: dict) -> None:
        shapes = self.param_shapes()
        missing = set(shapes) - set(params)
        if missing:
            raise ValueError(f"missing parameter tensors: {sorted(missing)}")
        for name, shape in shapes.items():
            if tuple(params[name].shape) != shape:
                raise ValueError(
                    f"parameter {name} has shape {params[name].shape},"
                    f" expected {shape}"
                )

    # -- forward ------------------------------------------------------------

    def _forward(self, params, state, disc):
        cfg = self.cfg
        binary_flat = state.binary.ravel()
        angles_flat = state.angles.ravel()
        if binary_flat.size != cfg.binary_dim or angles_flat.size != cfg.angles_dim:
            raise ValueError(
                f"state shape mismatch: binary {state.binary.shape},"
                f" angles {state.angles.shape} vs config"
                f" N={cfg.n_qubits}, n_step={cfg.n_step}"
            )
        x = np.concatenate([binary_flat, angles_flat])
        z1 = params["W1"] @ x + params["b1"]
        h1 = np.tanh(z1)
        z2 = params["W2"] @ h1 + params["b2"]
        h2 = np.tanh(z2)

        logits = params["Wd"] @ h2 + params["bd"]
        mu_raw = params["Wim"] @ h2 + params["bim"]
        t_mu = np.tanh(mu_raw)
        init_mu = cfg.init_mu_scale * t_mu
        is_raw = params["Wis"] @ h2 + params["bis"]
        init_sigma = _softplus(is_raw) + cfg.sigma_floor

        embed = params["E"][disc] if disc is not None else np.zeros(cfg.embed_dim)
        hist = params["P"] @ angles_flat + params["bp"]
        r_in = np.concatenate([h2, embed, hist])
        zr = params["Wr"] @ r_in + params["br"]
        hr = np.tanh(zr)
        delta_mu = params["Wrm"] @ hr + params["brm"]
        ds_raw = params["Wrs"] @ hr + params["brs"]
        delta_sigma = _softplus(ds_raw) + cfg.sigma_floor

        heads = PolicyHeads(logits, init_mu, init_sigma, delta_mu, delta_sigma)
        cache = dict(x=x, angles_flat=angles_flat, h1=h1, h2=h2, t_mu=t_mu,
                     is_raw=is_raw, disc=disc, r_in=r_in, hr=hr, ds_raw=ds_raw)
        return heads, cache

    def forward(self, params, state, disc=None) -> PolicyHeads:
        """Deterministic head computation. ``disc`` feeds the refine branch;
        with ``disc=None`` a zero embedding is used (pre-sampling pass)."""
        heads, _ = self._forward(params, state, disc)
        return heads

    # -- distributions ------------------------------------------------------

    def _masked_log_probs(self, heads, masks):
        z = heads.logits + (1.0 - masks.illegal) * self.cfg.mask_penalty
        return _log_softmax(z)

    def sample_action(self, heads, masks, rng, forced_disc=None):
        """Mask-and-sample. With ``forced_disc`` the categorical draw is
        skipped (used by :meth:`act`, which resamples heads after the
        discrete choice); the log-probability parts are identical."""
        if not masks.illegal.any():
            raise ValueError("no legal discrete action available")
        log_p = self._masked_log_probs(heads, masks)
        if forced_disc is None:
            disc = _categorical_draw(np.exp(log_p), rng)
        else:
            disc = int(forced_disc)
        lp_disc = float(log_p[disc])

        if masks.param[disc] == 1.0:
            mu = heads.init_mu[disc]
            sigma = heads.init_sigma[disc]
            init_angle = float(mu + sigma * rng.standard_normal())
            lp_init = float(_gauss_logpdf(init_angle, mu, sigma))
        else:
            init_angle = None
            lp_init = 0.0

        raw = heads.delta_mu + heads.delta_sigma * rng.standard_normal(self.cfg.n_step)
        deltas = raw * masks.delta
        active = masks.delta == 1.0
        lp_delta = float(np.sum(_gauss_logpdf(
            raw[active], heads.delta_mu[active], heads.delta_sigma[active])))

        action = HybridAction(disc=disc, init_angle=init_angle, deltas=deltas)
        return action, LogProbParts(lp_disc, lp_init, lp_delta)

    def act(self, params, state, masks, rng):
        """Two-pass sampling: draw the gate from the first pass, recompute
        heads conditioned on it, then draw the continuous components."""
        pre = self.forward(params, state, None)
        if not masks.illegal.any():
            raise ValueError("no legal discrete action available")
        probs = np.exp(self._masked_log_probs(pre, masks))
        disc = _categorical_draw(probs, rng)
        heads = self.forward(params, state, disc)
        action, parts = self.sample_action(heads, masks, rng, forced_disc=disc)
        return heads, action, parts

    def log_prob(self, heads, action, masks) -> float:
        """Sum of the three factor log-densities; inactive factors are 0."""
        rotation = masks.param[action.disc] == 1.0
        if rotation != (action.init_angle is not None):
            raise ValueError("init_angle must be present exactly for rotations")
        if np.any(action.deltas[masks.delta == 0.0] != 0.0):
            raise ValueError("deltas must be zero at masked positions")
        log_p = self._masked_log_probs(heads, masks)
        total = float(log_p[action.disc])
        if rotation:
            total += float(_gauss_logpdf(
                action.init_angle,
                heads.init_mu[action.disc],
                heads.init_sigma[action.disc],
            ))
        active = masks.delta == 1.0
        total += float(np.sum(_gauss_logpdf(
            action.deltas[active], heads.delta_mu[active],
            heads.delta_sigma[active])))
        return total

    def entropy(self, heads, masks) -> float:
        """Masked categorical entropy plus active Gaussian entropies; the
        init-head Gaussians are weighted by their candidates' probability."""
        log_p = self._masked_log_probs(heads, masks)
        p = np.exp(log_p)
        nz = p > 0.0
        h_cat = -float(np.sum(p[nz] * log_p[nz]))
        init_ent = _GAUSS_ENTROPY_CONST + np.log(heads.init_sigma)
        h_init = float(np.sum(p * masks.param * init_ent))
        delta_ent = _GAUSS_ENTROPY_CONST + np.log(heads.delta_sigma)
        h_delta = float(np.sum(masks.delta * delta_ent))
        return h_cat + h_init + h_delta

    # -- objective and gradients --------------------------------------------

    def loss(self, params, batch, entropy_beta) -> float:
        """-(1/B) * sum_b [log pi(a_b|s_b) * adv_b + beta * H(s_b)]."""
        total = 0.0
        for state, action, masks, advantage in batch:
            heads = self.forward(params, state, action.disc)
            total += self.log_prob(heads, action, masks) * advantage
            total += entropy_beta * self.entropy(heads, masks)
        return -total / len(batch)

    def gradients(self, params, batch, entropy_beta):
        """Exact gradient of :meth:`loss` for every parameter tensor.

        Returns (loss, grads) with grads keyed like ``params``.
        """
        if not batch:
            raise ValueError("batch must be non-empty")
        cfg = self.cfg
        grads = {name: np.zeros(shape) for name, shape in self.param_shapes().items()}
        total = 0.0
        for state, action, masks, advantage in batch:
            heads, cache = self._forward(params, state, action.disc)
            total += self.log_prob(heads, action, masks) * advantage
            total += entropy_beta * self.entropy(heads, masks)
            self._backward(params, heads, cache, action, masks, advantage,
                           entropy_beta, grads)
        scale = -1.0 / len(batch)
        for name in grads:
            grads[name] *= scale
        loss = scale * total
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite policy loss {loss}")
        return loss, grads

    def _backward(self, params, heads, cache, action, masks, advantage, beta,
                  grads):
        """Accumulate d/dparams of [log pi * adv + beta * H] for one sample."""
        cfg = self.cfg
        d = action.disc
        log_p = self._masked_log_probs(heads, masks)
        p = np.exp(log_p)
        nz = p > 0.0

        # categorical factor and entropy
        g_z = advantage * (-p)
        g_z[d] += advantage
        if beta != 0.0:
            h_cat = -float(np.sum(p[nz] * log_p[nz]))
            dh_cat = np.zeros_like(p)
            dh_cat[nz] = -p[nz] * (log_p[nz] + h_cat)
            init_ent = _GAUSS_ENTROPY_CONST + np.log(heads.init_sigma)
            w_vec = masks.param * init_ent
            s_init = float(np.sum(p * w_vec))
            g_z += beta * (dh_cat + p * (w_vec - s_init))

        # init head
        g_imu = np.zeros(cfg.n_actions)
        g_isg = np.zeros(cfg.n_actions)
        rotation = masks.param[d] == 1.0
        if rotation:
            mu, sigma = heads.init_mu[d], heads.init_sigma[d]
            diff = action.init_angle - mu
            g_imu[d] += advantage * diff / sigma**2
            g_isg[d] += advantage * (-1.0 / sigma + diff**2 / sigma**3)
        if beta != 0.0:
            g_isg += beta * p * masks.param / heads.init_sigma

        # refine head
        active = masks.delta == 1.0
        g_dmu = np.zeros(cfg.n_step)
        g_dsg = np.zeros(cfg.n_step)
        if active.any():
            diff = action.deltas[active] - heads.delta_mu[active]
            sig = heads.delta_sigma[active]
            g_dmu[active] = advantage * diff / sig**2
            g_dsg[active] = advantage * (-1.0 / sig + diff**2 / sig**3)
            if beta != 0.0:
                g_dsg[active] += beta / sig

        # chain through the squash / softplus parameterizations
        g_mu_raw = g_imu * cfg.init_mu_scale * (1.0 - cache["t_mu"] ** 2)
        g_is_raw = g_isg * _sigmoid(cache["is_raw"])
        g_ds_raw = g_dsg * _sigmoid(cache["ds_raw"])

        h2, h1, x = cache["h2"], cache["h1"], cache["x"]
        hr, r_in = cache["hr"], cache["r_in"]

        grads["Wd"] += np.outer(g_z, h2)
        grads["bd"] += g_z
        grads["Wim"] += np.outer(g_mu_raw, h2)
        grads["bim"] += g_mu_raw
        grads["Wis"] += np.outer(g_is_raw, h2)
        grads["bis"] += g_is_raw

        grads["Wrm"] += np.outer(g_dmu, hr)
        grads["brm"] += g_dmu
        grads["Wrs"] += np.outer(g_ds_raw, hr)
        grads["brs"] += g_ds_raw
        g_hr = params["Wrm"].T @ g_dmu + params["Wrs"].T @ g_ds_raw
        g_zr = g_hr * (1.0 - hr**2)
        grads["Wr"] += np.outer(g_zr, r_in)
        grads["br"] += g_zr
        g_rin = params["Wr"].T @ g_zr

        h2_dim = cfg.hidden[1]
        g_h2 = (params["Wd"].T @ g_z + params["Wim"].T @ g_mu_raw
                + params["Wis"].T @ g_is_raw + g_rin[:h2_dim])
        grads["E"][d] += g_rin[h2_dim:h2_dim + cfg.embed_dim]
        g_hist = g_rin[h2_dim + cfg.embed_dim:]
        grads["P"] += np.outer(g_hist, cache["angles_flat"])
        grads["bp"] += g_hist

        g_z2 = g_h2 * (1.0 - h2**2)
        grads["W2"] += np.outer(g_z2, h1)
        grads["b2"] += g_z2
        g_h1 = params["W2"].T @ g_z2
        g_z1 = g_h1 * (1.0 - h1**2)
        grads["W1"] += np.outer(g_z1, x)
        grads["b1"] += g_z1


def _gauss_logpdf(x, mu, sigma):
    return -0.5 * _LOG_2PI - np.log(sigma) - 0.5 * ((x - mu) / sigma) ** 2


def _categorical_draw(probs, rng) -> int:
    cum = np.cumsum(probs)
    u = rng.random() * cum[-1]
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, probs.size - 1)
    if probs[idx] == 0.0:  # float-edge guard: never return a masked entry
        nonzero = np.flatnonzero(probs)
        earlier = nonzero[nonzero < idx]
        idx = int(earlier[-1] if earlier.size else nonzero[0])
    return idx


# -- checkpoints -------------------------------------------------------------
# Versioned binary dump: magic, little-endian uint64 header length, JSON
# header (sorted keys; shapes + byte offsets + config + extra), then raw
# float64 tensor data. Deterministic bytes for identical contents.

_MAGIC = b"HYQASCKPT\x01"


def save_checkpoint(path, params: dict, cfg: PolicyConfig, extra: dict | None = None):
    names = sorted(params)
    tensors = []
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        tensors.append({"name": name, "shape": list(arr.shape),
                        "offset": offset, "nbytes": arr.nbytes})
        offset += arr.nbytes
    header = {
        "version": 1,
        "config": {
            "n_qubits": cfg.n_qubits, "n_step": cfg.n_step,
            "hidden": list(cfg.hidden), "refine_hidden": cfg.refine_hidden,
            "embed_dim": cfg.embed_dim, "history_dim": cfg.history_dim,
            "sigma_floor": cfg.sigma_floor, "mask_penalty": cfg.mask_penalty,
            "init_mu_scale": cfg.init_mu_scale, "delta_clip": cfg.delta_clip,
        },
        "extra": extra or {},
        "tensors": tensors,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (params, PolicyConfig, extra); rejects shape mismatches."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a policy checkpoint (bad magic)")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        data = fh.read()
    cfg_doc = header["config"]
    cfg = PolicyConfig(
        n_qubits=cfg_doc["n_qubits"], n_step=cfg_doc["n_step"],
        hidden=tuple(cfg_doc["hidden"]), refine_hidden=cfg_doc["refine_hidden"],
        embed_dim=cfg_doc["embed_dim"], history_dim=cfg_doc["history_dim"],
        sigma_floor=cfg_doc["sigma_floor"], mask_penalty=cfg_doc["mask_penalty"],
        init_mu_scale=cfg_doc["init_mu_scale"], delta_clip=cfg_doc["delta_clip"],
    )
    params = {}
    for rec in header["tensors"]:
        start, nbytes = rec["offset"], rec["nbytes"]
        arr = np.frombuffer(data[start:start + nbytes], dtype="<f8")
        params[rec["name"]] = arr.reshape(rec["shape"]).copy()
    HybridPolicy(cfg).validate_params(params)
    return params, cfg, header["extra"]
