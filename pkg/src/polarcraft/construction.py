"""Code construction: information sets for polar, PAC and CRC-aided polar codes.

All indices exposed by this module are 1-based, matching the usual way the
bit channels of a length-n polar code are numbered. Internally numpy arrays
use 0-based positions; ``CodeSpec.info_positions`` gives those.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

DEFAULT_Z0 = 0.5
DEFAULT_PAC_KERNEL = (1, 0, 1, 1, 0, 1, 1)

# x^3 + x + 1 and x^8 + x^2 + x + 1; bit j of the integer is the x^j coefficient.
CRC_POLYNOMIALS = {
    3: 0b1011,
    8: 0b100000111,
}


class Family(str, enum.Enum):
    POLAR = "polar"
    PAC = "pac"
    CRC_POLAR = "crc_polar"


class ConstructionError(ValueError):
    """Raised for invalid code parameters."""


def _check_length(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or n < 2 or n & (n - 1):
        raise ConstructionError(f"block length must be a power of two >= 2, got {n!r}")
    return int(n).bit_length() - 1


def poly_to_bits(poly: int) -> tuple[int, ...]:
    """Coefficient vector (x^0 first) of an integer-encoded GF(2) polynomial."""
    return tuple((poly >> j) & 1 for j in range(poly.bit_length()))


def bits_to_poly(bits: Sequence[int]) -> int:
    return sum(int(b) << j for j, b in enumerate(bits))


@dataclass(frozen=True)
class ReliabilityTable:
    z_values: tuple[float, ...]
    design_param: float

    @property
    def order(self) -> tuple[int, ...]:
        """1-based indices, least reliable first (larger z first, ties to smaller index)."""
        n = len(self.z_values)
        return tuple(i + 1 for i in sorted(range(n), key=lambda i: (-self.z_values[i], i)))


def bhattacharyya_table(n: int, z0: float = DEFAULT_Z0) -> ReliabilityTable:
    """Bhattacharyya parameters of the n synthetic channels of a BEC(z0).

    Leaf ``i`` (0-based) follows the binary expansion of ``i`` from the root:
    a 0 bit takes the minus branch ``2z - z^2``, a 1 bit the plus branch ``z^2``.
    """
    p = _check_length(n)
    if not 0.0 < z0 < 1.0:
        raise ConstructionError(f"z0 must lie in (0, 1), got {z0!r}")
    z = np.array([z0], dtype=np.float64)
    for _ in range(p):
        minus = 2.0 * z - z * z
        plus = z * z
        # children of node j sit at 2j (minus) and 2j + 1 (plus)
        z = np.stack([minus, plus], axis=1).reshape(-1)
    return ReliabilityTable(tuple(float(v) for v in z), float(z0))


@dataclass(frozen=True)
class CodeSpec:
    family: Family
    n: int
    k: int
    info_set: tuple[int, ...]
    reliability_order: tuple[int, ...]
    z0: Optional[float] = None
    pac_kernel: Optional[tuple[int, ...]] = None
    crc_poly: Optional[int] = None
    k_m: Optional[int] = None
    z_values: Optional[tuple[float, ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        _check_length(self.n)
        if not 1 <= self.k <= self.n:
            raise ConstructionError(f"k must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if len(self.info_set) != self.k:
            raise ConstructionError("info_set size differs from k")
        if list(self.info_set) != sorted(set(self.info_set)):
            raise ConstructionError("info_set must be strictly increasing")
        if self.info_set[0] < 1 or self.info_set[-1] > self.n:
            raise ConstructionError("info_set entries must lie in [1, n]")
        if sorted(self.reliability_order) != list(range(1, self.n + 1)):
            raise ConstructionError("reliability_order must be a permutation of [1, n]")
        if self.family is Family.PAC:
            if not self.pac_kernel or self.pac_kernel[0] != 1:
                raise ConstructionError("PAC kernel must be nonempty with leading bit 1")
        if self.family is Family.CRC_POLAR:
            if self.crc_poly is None or self.k_m is None:
                raise ConstructionError("CRC-polar spec needs crc_poly and k_m")
            if self.k_m + self.crc_degree != self.k:
                raise ConstructionError("k_m + crc degree must equal k")

    @property
    def crc_degree(self) -> int:
        return 0 if self.crc_poly is None else self.crc_poly.bit_length() - 1

    @property
    def payload_len(self) -> int:
        """Number of user bits per block (k, or k_m for CRC-aided codes)."""
        return self.k_m if self.family is Family.CRC_POLAR else self.k

    @property
    def info_positions(self) -> np.ndarray:
        return np.asarray(self.info_set, dtype=np.intp) - 1

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=np.uint8)
        mask[self.info_positions] = 0
        return mask

    @property
    def kernel(self) -> tuple[int, ...]:
        """Convolutional precoder taps; the identity kernel for non-PAC codes."""
        return self.pac_kernel if self.family is Family.PAC else (1,)

    def with_info_set(self, info_set: Iterable[int]) -> "CodeSpec":
        """Same code family and kernel, different information set (used for subcodes)."""
        info = tuple(sorted(int(i) for i in info_set))
        family = Family.PAC if self.family is Family.PAC else Family.POLAR
        return CodeSpec(
            family=family, n=self.n, k=len(info), info_set=info,
            reliability_order=self.reliability_order, z0=self.z0,
            pac_kernel=self.pac_kernel if family is Family.PAC else None,
            z_values=self.z_values,
        )

    def to_dict(self) -> dict:
        out = {
            "family": self.family.value,
            "n": self.n,
            "k": self.k,
            "info_set": list(self.info_set),
            "reliability_order": list(self.reliability_order),
            "z0": self.z0,
        }
        if self.pac_kernel is not None:
            out["pac_kernel"] = list(self.pac_kernel)
        if self.crc_poly is not None:
            out["crc_poly"] = list(poly_to_bits(self.crc_poly))
            out["k_m"] = self.k_m
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        family = Family(d["family"])
        crc = d.get("crc_poly")
        z_values = None
        if d.get("z0") is not None:
            z_values = bhattacharyya_table(int(d["n"]), float(d["z0"])).z_values
        return cls(
            family=family,
            n=int(d["n"]),
            k=int(d["k"]),
            info_set=tuple(int(i) for i in d["info_set"]),
            reliability_order=tuple(int(i) for i in d["reliability_order"]),
            z0=d.get("z0"),
            pac_kernel=tuple(d["pac_kernel"]) if d.get("pac_kernel") is not None else None,
            crc_poly=bits_to_poly(crc) if crc is not None else None,
            k_m=d.get("k_m"),
            z_values=z_values,
        )

    @classmethod
    def from_json(cls, text: str) -> "CodeSpec":
        return cls.from_dict(json.loads(text))


def _validate_override(override: Iterable[int], n: int, k: int) -> tuple[int, ...]:
    vals = [int(i) for i in override]
    if len(vals) != k or len(set(vals)) != k or any(not 1 <= i <= n for i in vals):
        raise ConstructionError(f"override must be {k} distinct indices in [1, {n}], got {vals}")
    return tuple(sorted(vals))


def build_polar_spec(
    n: int, k: int, z0: float = DEFAULT_Z0, override: Optional[Iterable[int]] = None
) -> CodeSpec:
    """Polar(n, k) with the k most reliable bit channels as information set.

    >>> build_polar_spec(8, 4).info_set
    (4, 6, 7, 8)
    """
    _check_length(n)
    if not 1 <= k <= n:
        raise ConstructionError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    table = bhattacharyya_table(n, z0)
    order = table.order
    if override is not None:
        info = _validate_override(override, n, k)
    else:
        info = tuple(sorted(order[n - k:]))
    return CodeSpec(Family.POLAR, n, k, info, order, z0=float(z0), z_values=table.z_values)


def rm_order(n: int) -> tuple[int, ...]:
    """1-based indices sorted by Hamming weight of (index - 1), ties to the larger index last."""
    _check_length(n)
    return tuple(i + 1 for i in sorted(range(n), key=lambda i: (bin(i).count("1"), i)))


def build_pac_spec(n: int, k: int, kernel: Sequence[int] = DEFAULT_PAC_KERNEL) -> CodeSpec:
    """PAC(n, k) with a Reed-Muller rate profile and convolutional precoder ``kernel``."""
    _check_length(n)
    kernel = tuple(int(c) for c in kernel)
    if not kernel or kernel[0] != 1 or any(c not in (0, 1) for c in kernel):
        raise ConstructionError("PAC kernel must be a nonempty bit vector with leading 1")
    if not 1 <= k <= n:
        raise ConstructionError(f"k must satisfy 1 <= k <= n, got k={k}, n={n}")
    order = rm_order(n)
    info = tuple(sorted(order[n - k:]))
    return CodeSpec(Family.PAC, n, k, info, order, pac_kernel=kernel)


def build_crc_polar_spec(
    n: int, k: int, crc_poly: int = CRC_POLYNOMIALS[3], z0: float = DEFAULT_Z0,
    override: Optional[Iterable[int]] = None,
) -> CodeSpec:
    """Polar(n, k) carrying k_m = k - deg(crc_poly) payload bits plus a systematic CRC."""
    if isinstance(crc_poly, (list, tuple)):
        crc_poly = bits_to_poly(crc_poly)
    degree = int(crc_poly).bit_length() - 1
    if degree < 1 or not crc_poly & 1:
        raise ConstructionError("CRC polynomial needs degree >= 1 and a nonzero constant term")
    if degree >= k:
        raise ConstructionError(f"CRC degree {degree} leaves no payload bits for k={k}")
    base = build_polar_spec(n, k, z0, override)
    return CodeSpec(
        Family.CRC_POLAR, n, k, base.info_set, base.reliability_order, z0=base.z0,
        crc_poly=int(crc_poly), k_m=k - degree, z_values=base.z_values,
    )


def n2c_order(spec: CodeSpec) -> tuple[int, ...]:
    """Information indices from least to most reliable (noisy to clean)."""
    if spec.family is Family.PAC:
        raise ConstructionError("noisy-to-clean ordering is defined for polar codes only")
    info = set(spec.info_set)
    return tuple(i for i in spec.reliability_order if i in info)
