"""Experiment suites over trained policies: ablations, the initialization
sensitivity study, two-sample KS comparison, and deterministic CSV/SVG
report emission.

Everything here is reproducible byte-for-byte: per-run generators are derived
from (seed, study, run index) so results do not depend on scheduling, and the
report writers format floats with fixed precision and carry no timestamps.
The ``HYQAS_THREADS`` environment variable caps the worker pool used for
independent runs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .circuit import Circuit
from .environment import CurriculumConfig, EnvConfig
from .hamiltonian import Hamiltonian
from .optimizer import OptimizerConfig, minimize
from .policy import PolicyConfig
from .quantum import hamiltonian_expectation
from .training import TrainConfig, evaluate_policy, train

INIT_STRATEGIES = ("near_zero", "random", "near_random")


def worker_count() -> int:
    raw = os.environ.get("HYQAS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Order-preserving map over independent work items; the worker count
    never changes results because each item owns its randomness."""
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- Kolmogorov-Smirnov -------------------------------------------------------

def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic D = sup |F_a - F_b| and its asymptotic
    p-value at effective size n_a*n_b/(n_a+n_b) (series truncated at 100
    terms, clamped to [0, 1]; D == 0 reports p = 1)."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    if d == 0.0:
        return 0.0, 1.0
    n_eff = a.size * b.size / (a.size + b.size)
    lam = math.sqrt(n_eff) * d
    p = 2.0 * sum((-1.0) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam)
                  for k in range(1, 101))
    return d, min(max(p, 0.0), 1.0)


# -- initialization sensitivity ----------------------------------------------

@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    min: float
    max: float
    n: int

    def __post_init__(self):
        if self.n > 0 and not (self.min <= self.mean <= self.max):
            raise ValueError("order statistics violated")
        if self.std < 0:
            raise ValueError("std must be >= 0")


def summarize(values) -> SummaryStats:
    values = np.asarray(values, dtype=float)
    return SummaryStats(mean=float(values.mean()), std=float(values.std()),
                        min=float(values.min()), max=float(values.max()),
                        n=int(values.size))


@dataclass
class InitStudyResult:
    records: list  # (strategy, run, final_energy)
    stats: dict  # strategy -> SummaryStats
    degenerate: bool  # circuit had no rotation gates


def run_init_sensitivity(circuit: Circuit, hamiltonian: Hamiltonian,
                         runs: int = 100, sigma: float = 1e-3, seed: int = 0,
                         opt_cfg: OptimizerConfig | None = None,
                         shared_base: bool = True) -> InitStudyResult:
    """Repeatedly optimize one frozen circuit under three initialization
    strategies.

    near_zero:   angles ~ N(0, sigma^2) per run
    random:      angles ~ U[-pi, pi] per run
    near_random: one shared U[-pi, pi] base draw, then N(0, sigma^2)
                 perturbations per run (``shared_base=False`` redraws the
                 base each run)
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    opt_cfg = opt_cfg or OptimizerConfig(max_evals=1000)
    k = circuit.n_parameters
    degenerate = k == 0

    def objective(x):
        return hamiltonian_expectation(circuit.statevector(x), hamiltonian)

    base_rng = np.random.default_rng([seed, 4])
    shared_draw = base_rng.uniform(-np.pi, np.pi, size=k)

    def run_one(task):
        strategy_idx, run = task
        strategy = INIT_STRATEGIES[strategy_idx]
        rng = np.random.default_rng([seed, 3, strategy_idx, run])
        if strategy == "near_zero":
            x0 = rng.normal(0.0, sigma, size=k)
        elif strategy == "random":
            x0 = rng.uniform(-np.pi, np.pi, size=k)
        else:
            base = shared_draw if shared_base else rng.uniform(-np.pi, np.pi, size=k)
            x0 = base + rng.normal(0.0, sigma, size=k)
        result = minimize(objective, x0, opt_cfg)
        return strategy, run, float(result.best_value)

    tasks = [(si, run) for si in range(len(INIT_STRATEGIES)) for run in range(runs)]
    records = parallel_map(run_one, tasks)
    stats = {}
    for strategy in INIT_STRATEGIES:
        values = [e for s, _, e in records if s == strategy]
        stats[strategy] = summarize(values)
    return InitStudyResult(records=records, stats=stats, degenerate=degenerate)


# -- ablations ----------------------------------------------------------------

ABLATION_VARIANTS = ("full", "no_hybrid", "no_refine", "no_external_opt")


def error_reduction_pct(e_baseline: float, e_variant: float) -> float:
    """(E(baseline) - E(variant)) / E(baseline) * 100."""
    return (e_baseline - e_variant) / e_baseline * 100.0


def _best_record(records):
    return min(records, key=lambda r: r.error)


def run_ablation_variant(variant: str, hamiltonian: Hamiltonian,
                         train_cfg: TrainConfig,
                         env_cfg: EnvConfig | None = None,
                         policy_cfg: PolicyConfig | None = None,
                         curriculum_cfg: CurriculumConfig | None = None,
                         eval_rollouts: int = 50,
                         eval_opt: OptimizerConfig | None = None) -> dict:
    """Train one reduced variant and report its best evaluated circuit."""
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    env_cfg = env_cfg or EnvConfig()
    train_variant = variant if variant in ("no_hybrid", "no_refine") else "full"
    if variant == "no_external_opt":
        env_cfg = replace(env_cfg, use_external_optimizer=False)
    result = train(train_cfg, hamiltonian, env_cfg, policy_cfg, curriculum_cfg,
                   variant=train_variant)
    mode = "zero" if variant == "no_hybrid" else "warm"
    records = evaluate_policy(
        result.best_params, result.policy_cfg, hamiltonian, mode=mode,
        n_rollouts=eval_rollouts, opt_cfg=eval_opt, env_cfg=env_cfg,
        seed=train_cfg.seed, variant=train_variant,
        use_optimizer=variant != "no_external_opt")
    best = _best_record(records)
    return {
        "variant": variant,
        "error": best.error,
        "params": best.params,
        "depth": best.depth,
        "gates": best.gates,
        "energy": best.energy,
        "train_best_error": result.best_error,
    }


def run_bsuite(hamiltonian: Hamiltonian, train_cfg: TrainConfig,
               env_cfg: EnvConfig | None = None,
               policy_cfg: PolicyConfig | None = None,
               curriculum_cfg: CurriculumConfig | None = None,
               eval_rollouts: int = 50,
               eval_opt: OptimizerConfig | None = None) -> list:
    """B1 warm-init / B2 zero-init on the full policy, B3 discrete-only with
    zero init, with relative error reduction against B3."""
    env_cfg = env_cfg or EnvConfig()
    full = train(train_cfg, hamiltonian, env_cfg, policy_cfg, curriculum_cfg,
                 variant="full")
    disc = train(train_cfg, hamiltonian, env_cfg, policy_cfg, curriculum_cfg,
                 variant="no_hybrid")
    kw = dict(n_rollouts=eval_rollouts, opt_cfg=eval_opt, env_cfg=env_cfg,
              seed=train_cfg.seed)
    e_b1 = _best_record(evaluate_policy(
        full.best_params, full.policy_cfg, hamiltonian, mode="warm", **kw)).error
    e_b2 = _best_record(evaluate_policy(
        full.best_params, full.policy_cfg, hamiltonian, mode="zero", **kw)).error
    e_b3 = _best_record(evaluate_policy(
        disc.best_params, disc.policy_cfg, hamiltonian, mode="zero",
        variant="no_hybrid", **kw)).error
    return [
        {"experiment": "B1", "init": "learned", "hybrid": True, "error": e_b1,
         "er_vs_b3_pct": error_reduction_pct(e_b3, e_b1)},
        {"experiment": "B2", "init": "zero", "hybrid": True, "error": e_b2,
         "er_vs_b3_pct": error_reduction_pct(e_b3, e_b2)},
        {"experiment": "B3", "init": "zero", "hybrid": False, "error": e_b3,
         "er_vs_b3_pct": 0.0},
    ]


# -- deterministic report emission ---------------------------------------------

def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, rows, columns) -> None:
    lines = [",".join(columns)]
    for row in rows:
        if isinstance(row, dict):
            lines.append(",".join(format_value(row[c]) for c in columns))
        else:
            lines.append(",".join(format_value(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> tuple[list, list]:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    columns = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return columns, rows


def read_csv_column(path, column) -> np.ndarray:
    columns, rows = read_csv(path)
    idx = columns.index(column)
    return np.array([float(r[idx]) for r in rows])


def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}"'
            f' height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def svg_histogram_pair(a, b, label_a, label_b, path, bins=40,
                       ks: tuple | None = None, title="") -> None:
    """Two overlaid histograms with an optional KS annotation; output bytes
    depend only on the inputs."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1e-12
    edges = np.linspace(lo, hi, bins + 1)
    counts_a, _ = np.histogram(a, edges)
    counts_b, _ = np.histogram(b, edges)
    peak = max(counts_a.max(), counts_b.max(), 1)
    width, height, margin = 640, 400, 50
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    parts = [_svg_header(width, height)]
    for counts, color in ((counts_a, "#1f77b4"), (counts_b, "#ff7f0e")):
        for i, count in enumerate(counts):
            if count == 0:
                continue
            x = margin + plot_w * i / bins
            bar_h = plot_h * count / peak
            parts.append(
                f'<rect x="{x:.3f}" y="{margin + plot_h - bar_h:.3f}"'
                f' width="{plot_w / bins:.3f}" height="{bar_h:.3f}"'
                f' fill="{color}" fill-opacity="0.55"/>\n')
    parts.append(
        f'<line x1="{margin}" y1="{margin + plot_h}" x2="{margin + plot_w}"'
        f' y2="{margin + plot_h}" stroke="black"/>\n')
    parts.append(
        f'<line x1="{margin}" y1="{margin}" x2="{margin}"'
        f' y2="{margin + plot_h}" stroke="black"/>\n')
    parts.append(f'<text x="{margin}" y="24" font-size="14">{title}</text>\n')
    parts.append(f'<text x="{margin}" y="{height - 12}" font-size="12"'
                 f' fill="#1f77b4">{label_a}</text>\n')
    parts.append(f'<text x="{margin + 180}" y="{height - 12}" font-size="12"'
                 f' fill="#ff7f0e">{label_b}</text>\n')
    parts.append(f'<text x="{margin}" y="{height - 28}" font-size="11">'
                 f'range [{lo:.6g}, {hi:.6g}]</text>\n')
    if ks is not None:
        parts.append(
            f'<text x="{margin + 320}" y="{height - 12}" font-size="12">'
            f'KS D={ks[0]:.6g}, p={ks[1]:.6g}</text>\n')
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(parts))


def svg_box_plot(groups: dict, path, title="") -> None:
    """Minimal box plot (quartiles + whiskers at min/max) per named group."""
    width, height, margin = 640, 400, 60
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    all_values = np.concatenate([np.asarray(v, float) for v in groups.values()])
    lo, hi = float(all_values.min()), float(all_values.max())
    if hi == lo:
        hi = lo + 1e-12

    def y(value):
        return margin + plot_h * (hi - value) / (hi - lo)

    parts = [_svg_header(width, height)]
    n = len(groups)
    for i, (name, values) in enumerate(groups.items()):
        values = np.asarray(values, float)
        q1, q2, q3 = (float(np.quantile(values, q)) for q in (0.25, 0.5, 0.75))
        vmin, vmax = float(values.min()), float(values.max())
        cx = margin + plot_w * (i + 0.5) / n
        half = plot_w / n * 0.25
        parts.append(f'<line x1="{cx:.3f}" y1="{y(vmin):.3f}" x2="{cx:.3f}"'
                     f' y2="{y(vmax):.3f}" stroke="black"/>\n')
        parts.append(f'<rect x="{cx - half:.3f}" y="{y(q3):.3f}"'
                     f' width="{2 * half:.3f}" height="{abs(y(q1) - y(q3)):.3f}"'
                     f' fill="#9ecae1" stroke="black"/>\n')
        parts.append(f'<line x1="{cx - half:.3f}" y1="{y(q2):.3f}"'
                     f' x2="{cx + half:.3f}" y2="{y(q2):.3f}"'
                     f' stroke="black" stroke-width="2"/>\n')
        parts.append(f'<text x="{cx - half:.3f}" y="{height - 16}"'
                     f' font-size="12">{name}</text>\n')
    parts.append(f'<text x="{margin}" y="24" font-size="14">{title}</text>\n')
    parts.append(f'<text x="{margin}" y="{height - 36}" font-size="11">'
                 f'range [{lo:.6g}, {hi:.6g}]</text>\n')
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(parts))
