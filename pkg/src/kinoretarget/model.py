"""Articulated rigid-body model: tree of bodies with revolute joints on a
floating (or welded) root, plus named sites for tracking and contact.

Coordinate layouts (fixed throughout the package):

* configuration ``q``: ``[base_pos(3), base_quat wxyz(4), joints(nl)]`` for a
  floating root, or just ``joints(nl)`` for a welded root,
* velocity ``v``: ``[base_lin world(3), base_ang body(3), joint rates(nl)]``
  (length ``nv = 6 + nl`` floating, ``nl`` welded); accelerations are the
  coordinate derivatives of ``v``.
"""

from __future__ import annotations

import heapq

from dataclasses import dataclass, field

import numpy as np

from .blockfile import BlockParseError, Node, parse_blockfile, parse_blockfile_path
from .rotations import euler_xyz_to_quat, quat_normalize, quat_to_mat

BIPED_CONTACT_SITES = ("left_heel", "left_toe", "right_heel", "right_toe")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class JointSpec:
    type: str                      # "floating" | "fixed" | "revolute"
    axis: np.ndarray               # unit axis in the child body frame (revolute)
    pos: np.ndarray                # parent-frame joint origin
    rpy: np.ndarray                # parent-frame joint orientation, intrinsic XYZ
    limits: tuple = (-np.pi, np.pi)
    vel_limits: tuple = (-100.0, 100.0)
    torque_limit: float = 1000.0


@dataclass(frozen=True)
class BodySpec:
    name: str
    parent: int                    # -1 for the root
    joint: JointSpec
    mass: float
    com: np.ndarray                # body-frame COM
    inertia: np.ndarray            # 3x3 rotational inertia about the COM, body frame


@dataclass(frozen=True)
class SiteSpec:
    name: str
    body: int
    pos: np.ndarray                # body-frame position
    quat: np.ndarray               # body-frame orientation
    kind: str                      # "tracking" | "contact"


@dataclass(frozen=True)
class Configuration:
    """Base pose plus joint vector; ``from_array``/``as_array`` round-trip the
    flat layout documented in the module header."""

    pos: np.ndarray
    quat: np.ndarray
    joints: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.pos, self.quat, self.joints])

    @staticmethod
    def from_array(model: "KinematicModel", q: np.ndarray) -> "Configuration":
        q = np.asarray(q, dtype=float)
        if q.shape != (model.nq,):
            raise ModelError(f"configuration length {q.shape} != ({model.nq},)")
        if model.floating:
            return Configuration(q[0:3].copy(), q[3:7].copy(), q[7:].copy())
        return Configuration(np.zeros(3), np.array([1.0, 0, 0, 0]), q.copy())


class KinematicModel:
    """Immutable after construction; shareable across threads."""

    def __init__(self, bodies, sites):
        self.bodies: list = list(bodies)
        self.nb = len(self.bodies)
        if self.nb == 0:
            raise ModelError("model has no bodies")
        root = self.bodies[0]
        if root.parent != -1:
            raise ModelError("body 0 must be the root (parent -1)")
        if root.joint.type not in ("floating", "fixed"):
            raise ModelError("root joint must be 'floating' or 'fixed'")
        for i, b in enumerate(self.bodies[1:], start=1):
            if not (0 <= b.parent < i):
                raise ModelError(f"body {b.name!r}: parent index {b.parent} out of order")
            if b.joint.type != "revolute":
                raise ModelError(f"body {b.name!r}: only revolute joints allowed below the root")

        self.floating = root.joint.type == "floating"
        self.nl = self.nb - 1                      # one revolute joint per non-root body
        self.nv = (6 if self.floating else 0) + self.nl
        self.nq = (7 if self.floating else 0) + self.nl
        self.parent = np.array([b.parent for b in self.bodies], dtype=int)

        # joint bookkeeping: body i (i>=1) drives velocity column dof_col[i]
        base = 6 if self.floating else 0
        self.dof_col = np.array([-1] + [base + j for j in range(self.nl)], dtype=int)

        self.joint_names = [b.name for b in self.bodies[1:]]
        self.q_min = np.array([b.joint.limits[0] for b in self.bodies[1:]], dtype=float)
        self.q_max = np.array([b.joint.limits[1] for b in self.bodies[1:]], dtype=float)
        self.qd_min = np.array([b.joint.vel_limits[0] for b in self.bodies[1:]], dtype=float)
        self.qd_max = np.array([b.joint.vel_limits[1] for b in self.bodies[1:]], dtype=float)
        self.u_max = np.array([b.joint.torque_limit for b in self.bodies[1:]], dtype=float)
        if np.any(self.q_min > self.q_max):
            raise ModelError("joint limits violate q_min <= q_max")
        if np.any(self.u_max <= 0.0):
            raise ModelError("torque limits must be positive")

        self.total_mass = float(sum(b.mass for b in self.bodies))
        if self.total_mass <= 0.0:
            raise ModelError("total mass must be positive")
        for b in self.bodies:
            if b.mass < 0.0:
                raise ModelError(f"body {b.name!r}: negative mass")
            if b.mass == 0.0 and b is not root:
                raise ModelError(f"body {b.name!r}: movable bodies need positive mass")
            sym = 0.5 * (b.inertia + b.inertia.T)
            if np.max(np.abs(b.inertia - sym)) > 1e-12:
                raise ModelError(f"body {b.name!r}: inertia not symmetric")
            eig = np.linalg.eigvalsh(sym)
            # ideal point masses (zero COM inertia) are accepted; negative is not
            if eig[0] < -1e-12:
                raise ModelError(f"body {b.name!r}: inertia not positive definite")

        self.sites: dict = {}
        for s in sites:
            if s.name in self.sites:
                raise ModelError(f"duplicate site {s.name!r}")
            if not (0 <= s.body < self.nb):
                raise ModelError(f"site {s.name!r}: body index {s.body} out of range")
            if s.kind not in ("tracking", "contact"):
                raise ModelError(f"site {s.name!r}: unknown kind {s.kind!r}")
            self.sites[s.name] = s
        self.contact_site_names = tuple(n for n, s in self.sites.items() if s.kind == "contact")

        # fixed parent->joint transforms, precomputed
        self._t_fix = np.stack([b.joint.pos for b in self.bodies])
        self._R_fix = np.stack([quat_to_mat(euler_xyz_to_quat(b.joint.rpy)) for b in self.bodies])
        self._axes = np.stack(
            [np.zeros(3)] + [b.joint.axis for b in self.bodies[1:]]
        )
        self.body_index = {b.name: i for i, b in enumerate(self.bodies)}

    # -- queries -------------------------------------------------------------
    def site(self, name: str) -> SiteSpec:
        try:
            return self.sites[name]
        except KeyError:
            raise ModelError(f"unknown site {name!r}") from None

    def joint_index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ModelError(f"unknown joint {name!r}") from None

    def require_biped_sites(self) -> None:
        missing = [n for n in BIPED_CONTACT_SITES if n not in self.sites or self.sites[n].kind != "contact"]
        if missing:
            raise ModelError(f"missing required contact sites: {', '.join(missing)}")

    def neutral_q(self) -> np.ndarray:
        joints = np.clip(np.zeros(self.nl), self.q_min, self.q_max)
        if not self.floating:
            return joints
        return np.concatenate([np.zeros(3), [1.0, 0.0, 0.0, 0.0], joints])

    def check_q(self, q: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.nq,):
            raise ModelError(f"configuration length {q.shape[0] if q.ndim else 0} != {self.nq}")
        if self.floating and abs(np.linalg.norm(q[3:7]) - 1.0) > tol:
            raise ModelError("base quaternion is not unit norm")
        return q

    def joint_slice(self, q: np.ndarray) -> np.ndarray:
        return q[7:] if self.floating else q

    def summary(self) -> str:
        lines = [
            f"bodies: {self.nb} (root {'floating' if self.floating else 'fixed'})",
            f"actuated dofs: {self.nl}   nv: {self.nv}   nq: {self.nq}",
            f"total mass: {self.total_mass:.3f} kg",
        ]
        for i, b in enumerate(self.bodies):
            parent = self.bodies[b.parent].name if b.parent >= 0 else "world"
            lines.append(f"  body[{i}] {b.name}  parent={parent}  joint={b.joint.type}  mass={b.mass:.3f}")
        for n, s in self.sites.items():
            lines.append(f"  site {n}  body={self.bodies[s.body].name}  kind={s.kind}")
        return "\n".join(lines)


# -- loading ------------------------------------------------------------------

def _parse_joint(node: Node) -> JointSpec:
    jtype = node.str_("type")
    if jtype not in ("floating", "fixed", "revolute"):
        raise ModelError(f"unknown joint type {jtype!r}")
    axis = np.array(node.floats("axis", [0.0, 0.0, 1.0]), dtype=float)
    if jtype == "revolute":
        n = np.linalg.norm(axis)
        if n < 1e-9:
            raise ModelError("revolute joint axis must be nonzero")
        axis = axis / n
    pos = np.array(node.floats("pos", [0.0, 0.0, 0.0]), dtype=float)
    rpy = np.array(node.floats("rpy", [0.0, 0.0, 0.0]), dtype=float)
    limits = tuple(node.floats("limits", [-np.pi, np.pi]))
    vel_limits = tuple(node.floats("vel_limits", [-100.0, 100.0]))
    torque_limit = node.float_("torque_limit", 1000.0)
    if len(limits) != 2 or len(vel_limits) != 2:
        raise ModelError("limits and vel_limits need exactly two values")
    return JointSpec(jtype, axis, pos, rpy, limits, vel_limits, torque_limit)


def _parse_inertia(node: Node):
    mass = node.float_("mass")
    com = np.array(node.floats("com", [0.0, 0.0, 0.0]), dtype=float)
    ixx = node.float_("ixx", 0.0)
    iyy = node.float_("iyy", 0.0)
    izz = node.float_("izz", 0.0)
    ixy = node.float_("ixy", 0.0)
    ixz = node.float_("ixz", 0.0)
    iyz = node.float_("iyz", 0.0)
    inertia = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]], dtype=float)
    return mass, com, inertia


def load_model_string(text: str, source: str = "<string>", biped: bool = False) -> KinematicModel:
    try:
        root = parse_blockfile(text, source=source)
    except BlockParseError as exc:
        raise ModelError(f"parse error: {exc}") from exc

    raw_bodies = root.blocks("body")
    if not raw_bodies:
        raise ModelError(f"{source}: no body blocks")

    names = []
    for b in raw_bodies:
        name = b.str_("name")
        if name in names:
            raise ModelError(f"duplicate body name {name!r}")
        names.append(name)
    index_of = {n: i for i, n in enumerate(names)}

    parents = []
    for b in raw_bodies:
        p = b.str_("parent", "world")
        if p in ("world", "none", "-1"):
            parents.append(-1)
        elif p in index_of:
            parents.append(index_of[p])
        else:
            try:
                parents.append(int(p))
            except ValueError:
                raise ModelError(f"body {b.str_('name')!r}: unknown parent {p!r}") from None

    order = _topological_order(names, parents)

    bodies = []
    remap = {old: new for new, old in enumerate(order)}
    for new_idx, old_idx in enumerate(order):
        node = raw_bodies[old_idx]
        joint = _parse_joint(node.child("joint"))
        mass, com, inertia = _parse_inertia(node.child("inertia"))
        parent = parents[old_idx]
        bodies.append(
            BodySpec(
                name=names[old_idx],
                parent=-1 if parent == -1 else remap[parent],
                joint=joint,
                mass=mass,
                com=com,
                inertia=inertia,
            )
        )

    sites = []
    for s in root.blocks("site"):
        body_name = s.str_("body")
        if body_name not in index_of:
            raise ModelError(f"site {s.str_('name')!r}: unknown body {body_name!r}")
        sites.append(
            SiteSpec(
                name=s.str_("name"),
                body=remap[index_of[body_name]],
                pos=np.array(s.floats("pos", [0.0, 0.0, 0.0]), dtype=float),
                quat=quat_normalize(euler_xyz_to_quat(np.array(s.floats("rpy", [0.0, 0.0, 0.0])))),
                kind=s.str_("kind", "tracking"),
            )
        )

    model = KinematicModel(bodies, sites)
    if biped:
        model.require_biped_sites()
    return model


def _topological_order(names, parents):
    roots = [i for i, p in enumerate(parents) if p == -1]
    if len(roots) != 1:
        raise ModelError(f"expected exactly one root body, found {len(roots)}")
    nb = len(names)
    for i, p in enumerate(parents):
        if p != -1 and not (0 <= p < nb):
            raise ModelError(f"body {names[i]!r}: parent index {p} out of range")
    # walk each body up to the root; revisits mean a cycle
    for i in range(nb):
        seen = set()
        j = i
        while j != -1:
            if j in seen:
                raise ModelError("cyclic parent graph")
            seen.add(j)
            j = parents[j]
    # stable: keeps the file order whenever it is already topologically valid
    order = []
    placed = set()
    pending = roots[:]
    heapq.heapify(pending)
    while pending:
        i = heapq.heappop(pending)
        order.append(i)
        placed.add(i)
        for j, p in enumerate(parents):
            if p == i and j not in placed:
                heapq.heappush(pending, j)
    if len(order) != nb:
        raise ModelError("cyclic parent graph")
    return order


def load_model(path, biped: bool = False) -> KinematicModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    return load_model_string(text, source=str(path), biped=biped)
