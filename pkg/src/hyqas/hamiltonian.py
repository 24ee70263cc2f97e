"""Pauli-term Hamiltonian files: parsing, validation, serialization, and the
bundled benchmark fixtures.

File format (JSON, one document per molecule)::

    {
      "name": "H2 (4 qubits)",
      "n_qubits": 4,
      "exact_ground_energy": -1.85105896,     # optional, Hartree
      "e_min_proxy": -2.85,                   # optional, Hartree
      "terms": [{"coeff": -0.81, "pauli": "IIII"}, ...]
    }

Pauli string character position k refers to qubit k (little-endian, matching
:mod:`hyqas.quantum`). Term order is preserved exactly; coefficients are never
pruned, however small.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

from .quantum import PauliString, exact_ground_energy


class HamiltonianFormatError(ValueError):
    """Raised when a Hamiltonian document fails validation."""


@dataclass(frozen=True)
class Hamiltonian:
    n_qubits: int
    terms: tuple  # of (coeff: float, pauli: PauliString)
    name: str = ""
    exact_ground_energy: float | None = None
    e_min_proxy: float | None = None

    def __post_init__(self):
        for coeff, p in self.terms:
            if p.n_qubits != self.n_qubits:
                raise HamiltonianFormatError(
                    f"term '{p.letters}' has {p.n_qubits} qubits, expected {self.n_qubits}"
                )
            if not math.isfinite(coeff):
                raise HamiltonianFormatError(f"non-finite coefficient {coeff!r}")


@dataclass(frozen=True)
class EnergyBounds:
    """Proxy lower bound and the exact (dense-diagonalization) ground energy."""

    e_min: float
    e_exact: float

    def __post_init__(self):
        if not self.e_min < self.e_exact:
            raise ValueError(
                f"proxy bound {self.e_min} must lie strictly below the exact"
                f" ground energy {self.e_exact}"
            )


def parse_hamiltonian(text: str) -> Hamiltonian:
    """Parse and validate a Hamiltonian document; term order is preserved."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HamiltonianFormatError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise HamiltonianFormatError("document root must be an object")
    try:
        n_qubits = doc["n_qubits"]
        raw_terms = doc["terms"]
    except KeyError as exc:
        raise HamiltonianFormatError(f"missing required field {exc}") from exc
    if not isinstance(n_qubits, int) or n_qubits < 1:
        raise HamiltonianFormatError(f"n_qubits must be a positive int, got {n_qubits!r}")
    terms = []
    for i, entry in enumerate(raw_terms):
        try:
            coeff = float(entry["coeff"])
            letters = entry["pauli"]
        except (KeyError, TypeError, ValueError) as exc:
            raise HamiltonianFormatError(f"bad term {i}: {exc}") from exc
        if not math.isfinite(coeff):
            raise HamiltonianFormatError(f"term {i}: non-finite coefficient")
        try:
            pauli = PauliString(n_qubits, letters)
        except ValueError as exc:
            raise HamiltonianFormatError(f"term {i}: {exc}") from exc
        terms.append((coeff, pauli))
    for key in ("exact_ground_energy", "e_min_proxy"):
        value = doc.get(key)
        if value is not None and not (
            isinstance(value, (int, float)) and math.isfinite(value)
        ):
            raise HamiltonianFormatError(f"{key} must be a finite number")
    return Hamiltonian(
        n_qubits=n_qubits,
        terms=tuple(terms),
        name=str(doc.get("name", "")),
        exact_ground_energy=doc.get("exact_ground_energy"),
        e_min_proxy=doc.get("e_min_proxy"),
    )


def serialize_hamiltonian(h: Hamiltonian) -> str:
    """Inverse of :func:`parse_hamiltonian`; round-trips coefficients bit-exactly."""
    doc = {"name": h.name, "n_qubits": h.n_qubits}
    if h.exact_ground_energy is not None:
        doc["exact_ground_energy"] = h.exact_ground_energy
    if h.e_min_proxy is not None:
        doc["e_min_proxy"] = h.e_min_proxy
    doc["terms"] = [{"coeff": c, "pauli": p.letters} for c, p in h.terms]
    return json.dumps(doc, indent=1)


def emin_proxy(h: Hamiltonian) -> float:
    """Unattainable lower bound: the recorded override, else -sum_i |h_i|."""
    if h.e_min_proxy is not None:
        return float(h.e_min_proxy)
    return -float(sum(abs(c) for c, _ in h.terms))


def energy_bounds(h: Hamiltonian) -> EnergyBounds:
    e_exact = h.exact_ground_energy
    if e_exact is None:
        e_exact = exact_ground_energy(h)
    return EnergyBounds(e_min=emin_proxy(h), e_exact=float(e_exact))


# ---------------------------------------------------------------------------
# Bundled fixtures
# ---------------------------------------------------------------------------

BUNDLED = {
    "toy-2q": "toy_2q.json",
    "h2-4": "h2_4q.json",
    "lih-4": "lih_4q.json",
    "lih-6": "lih_6q.json",
    "h2o-8": "h2o_8q.json",
}


def bundled_names() -> list[str]:
    return sorted(BUNDLED)


def load_bundled(name: str) -> Hamiltonian:
    try:
        filename = BUNDLED[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {bundled_names()}")
    text = resources.files("hyqas.data").joinpath(filename).read_text("utf-8")
    return parse_hamiltonian(text)


def load_hamiltonian_file(path) -> Hamiltonian:
    """Load from a filesystem path, or fall back to a bundled fixture name."""
    import os

    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            return parse_hamiltonian(fh.read())
    if str(path) in BUNDLED:
        return load_bundled(str(path))
    raise FileNotFoundError(f"no Hamiltonian file or bundled fixture named {path!r}")
