"""Multi-bus network assembly, nodal passivity and component sensitivity.

Buses carry a 2-dimensional dq coordinate pair, so an N-bus network lives
in a 2N-dimensional space.  The nodal admittance splits as

    Y_n(s) = Y_e(s) + Y_c(s) + Y_a(s)

where Y_e = Inc^T diag(Y_branch) Inc collects the series branches through
the signed incidence matrix, Y_c the network shunts, and Y_a the active
devices (block diagonal over their buses).  Y_net = Y_e + Y_c is the
passive network seen by the devices.

The nodal passivity index is the minimum eigenvalue of H_n = Y_n +
Y_n^dagger.  Because Y_n is linear in each component's 2x2 admittance,
the sensitivity of the index to a component perturbation dY needs only
the bus sub-vectors of the global minimum eigenvector phi:

    shunt-connected at bus i:  d index = phi_i^dagger (dY + dY^dagger) phi_i
    branch between i and j:    d index = (phi_i - phi_j)^dagger (dY + dY^dagger) (phi_i - phi_j)

The branch form is the incidence sandwich Inc^T (E_k (x) dH) Inc collapsed
onto the only two bus blocks the branch touches.  Scaling every component
admittance by a common factor scales Y_n by it, so the directional
sensitivities along each component's own admittance (its participation)
sum exactly to the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .devices import DeviceModel, param_derivative
from .errors import DegenerateEigenvalueError, UnknownBusError, UnknownComponentError
from .numerics import HermitianEigen, hermitian_eigen, inverse
from .passivity import DEGENERACY_RTOL, IndexSweep, SensitivitySeries, hermitian_part, is_degenerate


@dataclass(frozen=True)
class Branch:
    """Series element between two distinct buses."""

    from_bus: str
    to_bus: str
    model: DeviceModel


@dataclass(frozen=True)
class Shunt:
    """Passive network shunt at a bus."""

    bus: str
    model: DeviceModel


@dataclass(frozen=True)
class Device:
    """Named active device (converter, grid equivalent) shunt-connected at a bus."""

    bus: str
    name: str
    model: DeviceModel


@dataclass(frozen=True)
class ComponentRef:
    """Uniform handle on any network component for sensitivity work."""

    name: str
    kind: str                 # "device" | "branch" | "shunt"
    buses: tuple[int, ...]    # one bus index, or (from, to) for a branch
    model: DeviceModel


@dataclass(frozen=True)
class Network:
    """Immutable bus/branch/shunt/device description."""

    buses: tuple[str, ...]
    branches: tuple[Branch, ...] = ()
    shunts: tuple[Shunt, ...] = ()
    devices: tuple[Device, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "shunts", tuple(self.shunts))
        object.__setattr__(self, "devices", tuple(self.devices))
        if not self.buses:
            raise ValueError("network needs at least one bus")
        if len(set(self.buses)) != len(self.buses):
            raise ValueError("bus names must be unique")
        index = {b: k for k, b in enumerate(self.buses)}
        for br in self.branches:
            for b in (br.from_bus, br.to_bus):
                if b not in index:
                    raise UnknownBusError(f"branch endpoint {b!r} is not a bus")
            if br.from_bus == br.to_bus:
                raise ValueError(f"branch endpoints must differ, got {br.from_bus!r} twice")
        seen_shunt = set()
        for sh in self.shunts:
            if sh.bus not in index:
                raise UnknownBusError(f"shunt bus {sh.bus!r} is not a bus")
            if sh.bus in seen_shunt:
                raise ValueError(f"more than one shunt at bus {sh.bus!r}; merge them")
            seen_shunt.add(sh.bus)
        names = set()
        for dev in self.devices:
            if dev.bus not in index:
                raise UnknownBusError(f"device bus {dev.bus!r} is not a bus")
            if dev.name in names:
                raise ValueError(f"duplicate device name {dev.name!r}")
            names.add(dev.name)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def bus_index(self, name: str) -> int:
        try:
            return self.buses.index(name)
        except ValueError:
            raise UnknownBusError(f"{name!r} is not a bus") from None


def components(network: Network) -> tuple[ComponentRef, ...]:
    """All components in deterministic order: devices, branches, shunts.

    Devices keep their declared names; branches are named from-to#k with a
    per-pair counter; shunts are named sh@bus.
    """
    refs = []
    for dev in network.devices:
        refs.append(ComponentRef(dev.name, "device", (network.bus_index(dev.bus),), dev.model))
    pair_count: dict[tuple[str, str], int] = {}
    for br in network.branches:
        pair = (br.from_bus, br.to_bus)
        pair_count[pair] = pair_count.get(pair, 0) + 1
        name = f"{br.from_bus}-{br.to_bus}#{pair_count[pair]}"
        refs.append(ComponentRef(
            name, "branch",
            (network.bus_index(br.from_bus), network.bus_index(br.to_bus)),
            br.model,
        ))
    for sh in network.shunts:
        refs.append(ComponentRef(f"sh@{sh.bus}", "shunt", (network.bus_index(sh.bus),), sh.model))
    return tuple(refs)


def component(network: Network, name: str) -> ComponentRef:
    for ref in components(network):
        if ref.name == name:
            return ref
    raise UnknownComponentError(f"no component named {name!r}")


def incidence(network: Network) -> np.ndarray:
    """Signed branch-bus incidence, 2B x 2N, made of +-I2 blocks."""
    nb, nn = len(network.branches), network.n_buses
    inc = np.zeros((2 * nb, 2 * nn))
    for k, br in enumerate(network.branches):
        i, j = network.bus_index(br.from_bus), network.bus_index(br.to_bus)
        inc[2 * k:2 * k + 2, 2 * i:2 * i + 2] = np.eye(2)
        inc[2 * k:2 * k + 2, 2 * j:2 * j + 2] = -np.eye(2)
    return inc


def _add_block(y: np.ndarray, i: int, j: int, block: np.ndarray) -> None:
    y[2 * i:2 * i + 2, 2 * j:2 * j + 2] += block


def assemble_branches(network: Network, s: complex) -> np.ndarray:
    """Series-branch part Y_e = Inc^T diag(Y_branch) Inc, assembled blockwise."""
    n = network.n_buses
    y = np.zeros((2 * n, 2 * n), dtype=complex)
    for br in network.branches:
        yb = br.model.admittance(s)
        i, j = network.bus_index(br.from_bus), network.bus_index(br.to_bus)
        _add_block(y, i, i, yb)
        _add_block(y, j, j, yb)
        _add_block(y, i, j, -yb)
        _add_block(y, j, i, -yb)
    return y


def assemble_shunts(network: Network, s: complex) -> np.ndarray:
    n = network.n_buses
    y = np.zeros((2 * n, 2 * n), dtype=complex)
    for sh in network.shunts:
        _add_block(y, network.bus_index(sh.bus), network.bus_index(sh.bus),
                   sh.model.admittance(s))
    return y


def assemble_devices(network: Network, s: complex) -> np.ndarray:
    """Active-device part Y_a: block diagonal over the device buses."""
    n = network.n_buses
    y = np.zeros((2 * n, 2 * n), dtype=complex)
    for dev in network.devices:
        _add_block(y, network.bus_index(dev.bus), network.bus_index(dev.bus),
                   dev.model.admittance(s))
    return y


def assemble_net(network: Network, s: complex) -> np.ndarray:
    """Passive network admittance Y_net = branches + shunts."""
    return assemble_branches(network, s) + assemble_shunts(network, s)


def assemble_nodal(network: Network, s: complex) -> np.ndarray:
    """Full nodal admittance Y_n = Y_net + Y_a."""
    return assemble_net(network, s) + assemble_devices(network, s)


def closed_loop_impedance(network: Network, s: complex) -> np.ndarray:
    """Z_cl = Y_n^-1; raises SingularMatrixError at a system mode."""
    return inverse(assemble_nodal(network, s))


@dataclass(frozen=True, eq=False)
class NodalPassivityPoint:
    """Eigenstructure of the nodal Hermitian part at one frequency."""

    omega: float
    index: float            # minimum eigenvalue of H_n
    spectrum: np.ndarray    # all eigenvalues, ascending; spectrum[0] == index
    min_vector: np.ndarray  # unit eigenvector of the minimum eigenvalue

    @property
    def eigen_gap(self) -> float:
        return float(self.spectrum[1] - self.spectrum[0]) if self.spectrum.size > 1 else math.inf


def _nodal_eigen(network: Network, omega: float) -> tuple[HermitianEigen, bool]:
    h = hermitian_part(assemble_nodal(network, 1j * omega))
    eig = hermitian_eigen(h)
    return eig, is_degenerate(eig, np.linalg.norm(h))


def nodal_passivity(network: Network, omega: float) -> NodalPassivityPoint:
    """Full nodal passivity spectrum at one frequency."""
    eig, _ = _nodal_eigen(network, omega)
    return NodalPassivityPoint(
        omega=float(omega),
        index=eig.min_value,
        spectrum=eig.values,
        min_vector=eig.min_vector,
    )


def nodal_passivity_sweep(network: Network, omegas) -> IndexSweep:
    """Nodal passivity index over a frequency grid."""
    omegas = np.asarray(omegas, dtype=float)

    def point(w: float):
        eig, _ = _nodal_eigen(network, w)
        return eig.min_value, eig.eigen_gap

    rows = parallel_map(point, omegas)
    return IndexSweep(
        omegas=omegas,
        indices=np.array([r[0] for r in rows]),
        eigen_gaps=np.array([r[1] for r in rows]),
    )


def _require_simple(eig: HermitianEigen, degen: bool, omega: float, what: str) -> None:
    if degen:
        raise DegenerateEigenvalueError(
            f"minimum nodal eigenvalue is not simple at omega={omega:.6g} rad/s; "
            f"{what} is not defined there"
        )


def _window_quadratic(phi: np.ndarray, buses: tuple[int, ...], dy: np.ndarray) -> float:
    """phi_w^dagger (dY + dY^dagger) phi_w with phi_w the window the
    perturbation sees: a bus sub-vector, or their difference for a branch."""
    if len(buses) == 2:
        i, j = buses
        w = phi[2 * i:2 * i + 2] - phi[2 * j:2 * j + 2]
    else:
        (i,) = buses
        w = phi[2 * i:2 * i + 2]
    dy = np.asarray(dy, dtype=complex)
    return float((w.conj() @ (dy + dy.conj().T) @ w).real)


def nodal_sensitivity_shunt(network: Network, omega: float, bus_i, dy: np.ndarray) -> float:
    """d index for a 2x2 perturbation dY on the diagonal block of bus_i.

    Covers shunts and shunt-connected devices alike; bus_i may be an index
    or a bus name.
    """
    i = network.bus_index(bus_i) if isinstance(bus_i, str) else int(bus_i)
    if not (0 <= i < network.n_buses):
        raise UnknownBusError(f"bus index {i} out of range")
    eig, degen = _nodal_eigen(network, omega)
    _require_simple(eig, degen, omega, "the shunt sensitivity")
    return _window_quadratic(eig.min_vector, (i,), dy)


def nodal_sensitivity_branch(network: Network, omega: float, branch_k: int, dy: np.ndarray) -> float:
    """d index for a 2x2 perturbation dY of branch number branch_k."""
    if not (0 <= branch_k < len(network.branches)):
        raise UnknownComponentError(f"branch index {branch_k} out of range")
    br = network.branches[branch_k]
    i, j = network.bus_index(br.from_bus), network.bus_index(br.to_bus)
    eig, degen = _nodal_eigen(network, omega)
    _require_simple(eig, degen, omega, "the branch sensitivity")
    return _window_quadratic(eig.min_vector, (i, j), dy)


def directional_nodal_sensitivity(phi: np.ndarray, ref: ComponentRef, dy: np.ndarray) -> float:
    """Sensitivity along dY for any component, given the unit minimum
    eigenvector of the nodal Hermitian part."""
    return _window_quadratic(phi, ref.buses, dy)


def nodal_sensitivity_at(network: Network, name: str, param_name: str, omega: float) -> tuple[float, float]:
    """(nodal index, d index / d rho) for one component parameter at one frequency."""
    ref = component(network, name)
    eig, degen = _nodal_eigen(network, omega)
    _require_simple(eig, degen, omega, "the parametric sensitivity")
    dy = param_derivative(ref.model, param_name, 1j * omega)
    return eig.min_value, directional_nodal_sensitivity(eig.min_vector, ref, dy)


def nodal_param_sensitivity(network: Network, name: str, param_name: str, omegas) -> SensitivitySeries:
    """Nodal index and its derivative w.r.t. one component parameter.

    Degenerate frequencies are flagged per point (derivative NaN) instead
    of aborting the sweep.
    """
    ref = component(network, name)
    omegas = np.asarray(omegas, dtype=float)

    def point(w: float):
        eig, degen = _nodal_eigen(network, w)
        if degen:
            return eig.min_value, math.nan, True
        dy = param_derivative(ref.model, param_name, 1j * w)
        return eig.min_value, directional_nodal_sensitivity(eig.min_vector, ref, dy), False

    rows = parallel_map(point, omegas)
    return SensitivitySeries(
        param_name=param_name,
        omegas=omegas,
        indices=np.array([r[0] for r in rows]),
        derivatives=np.array([r[1] for r in rows]),
        degenerate=np.array([r[2] for r in rows], dtype=bool),
    )


@dataclass(frozen=True)
class ParticipationTable:
    """Component participations in the nodal index over a frequency grid.

    values[c, k] is component c's share at frequency k; at non-degenerate
    frequencies the column sums equal the index exactly (scaling
    homogeneity of the minimum eigenvalue).
    """

    names: tuple[str, ...]
    omegas: np.ndarray
    indices: np.ndarray
    values: np.ndarray      # (len(names), len(omegas))
    degenerate: np.ndarray  # bool per frequency

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.omegas / (2.0 * math.pi)


def participation(network: Network, omega: float, component_name: str) -> float:
    """One component's share of the nodal index at one frequency.

    Directional sensitivity along the component's own admittance, i.e. the
    response to scaling that component by (1 + eps).
    """
    ref = component(network, component_name)
    eig, degen = _nodal_eigen(network, omega)
    _require_simple(eig, degen, omega, "participation")
    return directional_nodal_sensitivity(eig.min_vector, ref, ref.model.admittance(1j * omega))


def participation_table(network: Network, omega: float) -> tuple[tuple[str, ...], np.ndarray, float]:
    """(names, shares, index) for every component at one frequency; the
    shares sum to the index."""
    refs = components(network)
    eig, degen = _nodal_eigen(network, omega)
    _require_simple(eig, degen, omega, "participation")
    phi = eig.min_vector
    shares = np.array([
        directional_nodal_sensitivity(phi, ref, ref.model.admittance(1j * omega))
        for ref in refs
    ])
    return tuple(r.name for r in refs), shares, eig.min_value


def participation_sweep(network: Network, omegas) -> ParticipationTable:
    """Component participations across a frequency grid; degenerate points flagged."""
    refs = components(network)
    omegas = np.asarray(omegas, dtype=float)

    def point(w: float):
        eig, degen = _nodal_eigen(network, w)
        if degen:
            return eig.min_value, np.full(len(refs), math.nan), True
        phi = eig.min_vector
        shares = np.array([
            directional_nodal_sensitivity(phi, ref, ref.model.admittance(1j * w))
            for ref in refs
        ])
        return eig.min_value, shares, False

    rows = parallel_map(point, omegas)
    return ParticipationTable(
        names=tuple(r.name for r in refs),
        omegas=omegas,
        indices=np.array([r[0] for r in rows]),
        values=np.stack([r[1] for r in rows], axis=1),
        degenerate=np.array([r[2] for r in rows], dtype=bool),
    )
