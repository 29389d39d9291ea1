"""Internal level structure of the J_g=2 <-> J_e=1 transition.

Natural units throughout: hbar = 1, momenta in hbar*k, rates in Gamma.
"""
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
from sympy.physics.quantum.cg import CG

J_GROUND = 2
J_EXCITED = 1


class Manifold(str, Enum):
    GROUND = "ground"
    EXCITED = "excited"


class Polarization(IntEnum):
    """Spherical photon component; value is the change of m on absorption."""
    SIGMA_MINUS = -1
    PI = 0
    SIGMA_PLUS = 1


class FamilyKind(str, Enum):
    LAMBDA = "lambda"
    INVERTED_W = "inverted_w"

    @property
    def size(self) -> int:
        return len(_MEMBERS[self])


@dataclass(frozen=True)
class InternalState:
    manifold: Manifold
    m: int

    def __post_init__(self):
        j = J_GROUND if self.manifold is Manifold.GROUND else J_EXCITED
        if abs(self.m) > j:
            raise ValueError(f"m={self.m} outside the {self.manifold.value} manifold (|m| <= {j})")

    @property
    def is_excited(self) -> bool:
        return self.manifold is Manifold.EXCITED

    @property
    def label(self) -> str:
        prefix = "e" if self.is_excited else "g"
        return f"{prefix}{self.m:+d}" if self.m else f"{prefix}0"

    def __str__(self) -> str:
        return self.label


def ground(m: int) -> InternalState:
    return InternalState(Manifold.GROUND, m)


def excited(m: int) -> InternalState:
    return InternalState(Manifold.EXCITED, m)


ALL_STATES: tuple[InternalState, ...] = tuple(
    [ground(m) for m in range(-J_GROUND, J_GROUND + 1)]
    + [excited(m) for m in range(-J_EXCITED, J_EXCITED + 1)]
)


class FamilyMember(NamedTuple):
    state: InternalState
    offset: int  # momentum offset in units of hbar*k


_MEMBERS: dict[FamilyKind, tuple[FamilyMember, ...]] = {
    FamilyKind.LAMBDA: (
        FamilyMember(excited(0), 0),
        FamilyMember(ground(-1), -1),
        FamilyMember(ground(1), 1),
    ),
    FamilyKind.INVERTED_W: (
        FamilyMember(ground(-2), -2),
        FamilyMember(excited(-1), -1),
        FamilyMember(ground(0), 0),
        FamilyMember(excited(1), 1),
        FamilyMember(ground(2), 2),
    ),
}


@dataclass(frozen=True)
class FamilyBasis:
    kind: FamilyKind
    q: float
    members: tuple[FamilyMember, ...]

    @property
    def offsets(self) -> np.ndarray:
        return np.array([mem.offset for mem in self.members], dtype=int)

    @property
    def momenta(self) -> np.ndarray:
        """Physical momentum of each member, q + offset."""
        return self.q + self.offsets

    @property
    def excited_mask(self) -> np.ndarray:
        return np.array([mem.state.is_excited for mem in self.members])

    def index_of(self, state: InternalState) -> int:
        for i, mem in enumerate(self.members):
            if mem.state == state:
                return i
        raise ValueError(f"{state} is not a member of the {self.kind.value} family")


def family_members(kind: FamilyKind, q: float = 0.0) -> FamilyBasis:
    return FamilyBasis(kind=FamilyKind(kind), q=float(q), members=_MEMBERS[FamilyKind(kind)])


class FamilySlot(NamedTuple):
    kind: FamilyKind
    index: int
    offset: int


def family_of(state: InternalState) -> FamilySlot:
    """Family kind, member index and momentum offset holding `state`."""
    for kind, members in _MEMBERS.items():
        for i, mem in enumerate(members):
            if mem.state == state:
                return FamilySlot(kind, i, mem.offset)
    raise ValueError(f"{state} belongs to no family")


@lru_cache(maxsize=None)
def _cg(m_g: int, q: int, m_e: int) -> float:
    """<J_g m_g; 1 q | J_e m_e> (Condon-Shortley)."""
    return float(CG(J_GROUND, m_g, 1, q, J_EXCITED, m_e).doit())


def coupling_amplitude(m_g: int, polarization: Polarization) -> float:
    """Prefactor of (hbar/2)*Omega for the laser transition g_{m_g} -> e_{m_g +- 1}.

    Zero when the target excited sublevel does not exist. The sigma
    components of the Clebsch-Gordan table are all positive.
    """
    if abs(m_g) > J_GROUND:
        raise ValueError(f"m_g={m_g} outside the ground manifold")
    polarization = Polarization(polarization)
    if polarization is Polarization.PI:
        raise ValueError("the counterpropagating beams carry no pi component")
    m_e = m_g + int(polarization)
    if abs(m_e) > J_EXCITED:
        return 0.0
    return _cg(m_g, int(polarization), m_e)


def decay_amplitude(m_e: int, channel: Polarization) -> float:
    """Signed amplitude for e_{m_e} -> g_{m_e - channel} emitting a `channel` photon.

    The squares over the three channels sum to one.
    """
    if abs(m_e) > J_EXCITED:
        raise ValueError(f"m_e={m_e} outside the excited manifold")
    channel = Polarization(channel)
    m_g = m_e - int(channel)
    if abs(m_g) > J_GROUND:
        return 0.0
    return _cg(m_g, int(channel), m_e)


def branching_ratio(m_e: int, channel: Polarization) -> float:
    return decay_amplitude(m_e, channel) ** 2


@dataclass(frozen=True)
class MomentumGrid:
    p_max: float
    points_per_recoil: int

    def __post_init__(self):
        if self.p_max <= 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")
        if self.points_per_recoil < 1:
            raise ValueError(f"points_per_recoil must be >= 1, got {self.points_per_recoil}")
        half = self.p_max * self.points_per_recoil
        if abs(half - round(half)) > 1e-9:
            raise ValueError("p_max must be a whole number of grid spacings")

    @property
    def half_points(self) -> int:
        return int(round(self.p_max * self.points_per_recoil))

    @property
    def size(self) -> int:
        return 2 * self.half_points + 1

    @property
    def spacing(self) -> float:
        return 1.0 / self.points_per_recoil

    @cached_property
    def values(self) -> np.ndarray:
        # integer multiples of the spacing keep recoil shifts exact index shifts
        return np.arange(-self.half_points, self.half_points + 1) / self.points_per_recoil

    def shift_points(self, offset: int) -> int:
        """Index shift corresponding to `offset` recoil momenta."""
        return int(offset) * self.points_per_recoil

    def index_of(self, p: float) -> int | None:
        k = round(p * self.points_per_recoil) + self.half_points
        if 0 <= k < self.size and abs(p * self.points_per_recoil - round(p * self.points_per_recoil)) < 1e-9:
            return int(k)
        return None

    def __len__(self) -> int:
        return self.size


def build_momentum_grid(p_max: float, points_per_recoil: int) -> MomentumGrid:
    return MomentumGrid(p_max=float(p_max), points_per_recoil=int(points_per_recoil))
