"""Built-in scenarios: manifold, graded bundle, bundle map, zero set and oracles.

Five configurations are registered:

* ``t2_nonvanishing``: flat T^2, K = e_1 (no zeros).
* ``t2_oriented_frame``: flat T^2, K = e_1 + i e_2 (h = 0 everywhere, v_K invertible).
* ``s2_rotation_isolated``: round S^2, K = rotation field, zeros at both poles.
* ``s2_corollary1``: round S^2, E+ trivial, E- the degree-one line bundle, v = z near the north pole.
* ``s2xs2_nonisolated``: S^2 x S^2, K = rotation field of the second factor, zeros S^2 x {N, S}.

The signature scenarios use E = Lambda(T*M (x) C) with the Levi-Civita connection
split by tau into Lambda+ and Lambda-, and v = v_K from the Clifford model.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .atlas import Atlas, ProductAtlas, SphereAtlas, TorusAtlas, octahedron, product_mesh, torus_triangulation
from .bundle import GradedConnection, InducedConnection, LocalConnection, atlas_steps
from .clifford import build_clifford_model, symbol_at_point
from .errors import ConfigurationError
from .forms import Form
from .localization import FiberStructure, Scenario, ZeroComponent

MANIFOLDS = ("s2", "t2", "s2xs2")
FIELDS = ("zero", "constant_e1", "constant_e2", "rotation", "rotation_second_factor")
POLES = ("N", "S")
TOLERANCE_KEYS = (
    "all", "lemma1", "lemma1_complement", "lemma1_vanishing", "lemma2",
    "theorem1", "corollary1", "lemma4", "theorem2",
)


@dataclass
class ScenarioConfig:
    name: str
    manifold: str
    n: int
    resolution: int
    summary: str = ""
    tube_radius: float = 0.9
    trunc: tuple[float, float] | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    sections: dict[str, str] = field(default_factory=dict)
    bundle: str = "signature"
    expected: dict[str, dict[str, Any]] = field(default_factory=dict)
    profile: str = "quintic"
    stencil_order: int = 4
    chunk: int = 2048

    def __post_init__(self):
        if self.trunc is None:
            self.trunc = (0.5 * self.tube_radius, 0.9 * self.tube_radius)
        self.trunc = tuple(float(x) for x in self.trunc)

    def validate(self) -> None:
        """Raise ConfigurationError naming the first invalid field."""
        def bad(name, msg):
            raise ConfigurationError(f"{self.name}: field '{name}': {msg}")

        if self.manifold not in MANIFOLDS:
            bad("manifold", f"unknown manifold {self.manifold!r}; expected one of {MANIFOLDS}")
        want_n = 2 if self.manifold == "s2xs2" else 1
        if self.n != want_n:
            bad("n", f"manifold {self.manifold} has n = {want_n}, got {self.n}")
        if not isinstance(self.resolution, int) or self.resolution < 16:
            bad("resolution", f"must be an integer >= 16, got {self.resolution!r}")
        if not (self.tube_radius > 0 and math.isfinite(self.tube_radius)):
            bad("tube_radius", f"must be positive, got {self.tube_radius}")
        if self.manifold in ("s2", "s2xs2") and self.tube_radius >= 1.0:
            bad("tube_radius", f"tubes around antipodal poles overlap unless radius < 1, got {self.tube_radius}")
        a, b = self.trunc
        if not (0 < a < b <= self.tube_radius):
            bad("trunc", f"need 0 < a < b <= tube radius, got a={a}, b={b}, R={self.tube_radius}")
        for key, name in self.sections.items():
            if key not in ("xi", "eta"):
                bad("sections", f"unknown section {key!r}")
            if name not in FIELDS:
                bad("sections", f"unresolvable field {name!r}")
        for key, tol in self.tolerances.items():
            if key not in TOLERANCE_KEYS:
                bad("tolerances", f"unknown check {key!r}")
            if not (isinstance(tol, (int, float)) and tol >= 0):
                bad("tolerances", f"tolerance for {key!r} must be a nonnegative number")
        if self.bundle not in ("signature", "line_degree_one"):
            bad("bundle", f"unknown bundle {self.bundle!r}")
        if self.bundle == "line_degree_one" and self.manifold != "s2":
            bad("bundle", "the degree-one line bundle is defined on s2 only")
        if self.profile not in ("quintic", "smooth"):
            bad("profile", f"unknown profile {self.profile!r}")
        if self.stencil_order not in (2, 4):
            bad("stencil_order", f"must be 2 or 4, got {self.stencil_order}")

    def replace(self, **changes) -> "ScenarioConfig":
        if "tube_radius" in changes and "trunc" not in changes:
            scale = changes["tube_radius"] / self.tube_radius
            changes["trunc"] = (self.trunc[0] * scale, self.trunc[1] * scale)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["trunc"] = list(self.trunc)
        return d


def builtin_configs() -> dict[str, ScenarioConfig]:
    configs = [
        ScenarioConfig(
            "t2_nonvanishing",
            "t2",
            1,
            32,
            summary="flat torus, K = e1 nowhere zero; every localized quantity vanishes",
            sections={"xi": "constant_e1", "eta": "zero"},
            tolerances={"lemma1": 1e-6, "theorem1": 1e-6, "lemma4": 1e-6, "theorem2": 1e-6, "corollary1": 1e-6},
            expected={"chi": {"value": 0, "provenance": "torus triangulation oracle"}},
        ),
        ScenarioConfig(
            "t2_oriented_frame",
            "t2",
            1,
            32,
            summary="flat torus, K = e1 + i e2: h = 0 everywhere yet v_K invertible (oriented-frame branch)",
            sections={"xi": "constant_e1", "eta": "constant_e2"},
            tolerances={"lemma1": 1e-6, "theorem1": 1e-6, "lemma4": 1e-6, "theorem2": 1e-6, "corollary1": 1e-6},
            expected={"chi": {"value": 0, "provenance": "torus triangulation oracle"}},
        ),
        ScenarioConfig(
            "s2_rotation_isolated",
            "s2",
            1,
            96,
            summary="round sphere, K = rotation field with zeros at both poles",
            sections={"xi": "rotation", "eta": "zero"},
            expected={
                "chi": {"value": 2, "provenance": "octahedron oracle"},
                "global": {"value": -4, "provenance": "(-2)^n chi"},
            },
        ),
        ScenarioConfig(
            "s2_corollary1",
            "s2",
            1,
            96,
            summary="round sphere, v: trivial line -> degree-one line bundle, v = z near the north pole",
            bundle="line_degree_one",
            expected={"global": {"value": -1, "provenance": "minus the first Chern number of O(1)"}},
        ),
        ScenarioConfig(
            "s2xs2_nonisolated",
            "s2xs2",
            2,
            24,
            summary="S2 x S2, K = rotation field of the second factor, zeros S2 x {N, S}",
            tube_radius=0.9,
            sections={"xi": "rotation_second_factor", "eta": "zero"},
            expected={
                "chi": {"value": 4, "provenance": "product cell structure oracle"},
                "global": {"value": 16, "provenance": "(-2)^n chi"},
            },
        ),
    ]
    return {c.name: c for c in configs}


def list_scenarios() -> list[tuple[str, str]]:
    return [(name, cfg.summary) for name, cfg in sorted(builtin_configs().items())]


def load_config(name: str, override_path: str | Path | None = None, **changes) -> ScenarioConfig:
    configs = builtin_configs()
    if name not in configs:
        raise ConfigurationError(f"unknown scenario {name!r}; available: {', '.join(sorted(configs))}")
    cfg = configs[name]
    if override_path is not None:
        data = json.loads(Path(override_path).read_text())
        allowed = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"name"}
        for key in data:
            if key not in allowed:
                raise ConfigurationError(f"{name}: field '{key}': not a scenario field")
        if "trunc" in data:
            data["trunc"] = tuple(data["trunc"])
        cfg = cfg.replace(**data)
    changes = {k: v for k, v in changes.items() if v is not None}
    if changes:
        cfg = cfg.replace(**changes)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# vector fields (orthonormal-frame components)


def sphere_rotation(chart_id, points: np.ndarray) -> np.ndarray:
    """Rotation about the polar axis in the orthonormal frame e_i = d_i / phi."""
    x, y = points[:, 0], points[:, 1]
    phi = SphereAtlas.conformal_factor(points)
    if chart_id == "N":
        return np.stack([-y * phi, x * phi], axis=1)
    return np.stack([y * phi, -x * phi], axis=1)


def _field(name: str, atlas: Atlas, dim: int) -> Callable:
    if name == "zero":
        return lambda cid, p: np.zeros((len(p), dim))
    if name in ("constant_e1", "constant_e2"):
        k = 0 if name == "constant_e1" else 1
        return lambda cid, p: np.broadcast_to(np.eye(dim)[k], (len(p), dim)).copy()
    if name == "rotation":
        if not isinstance(atlas, SphereAtlas):
            raise ConfigurationError("field 'rotation' needs the sphere")
        return sphere_rotation
    if name == "rotation_second_factor":
        if not isinstance(atlas, ProductAtlas):
            raise ConfigurationError("field 'rotation_second_factor' needs a product manifold")
        split = atlas.first.dim

        def fn(cid, p):
            out = np.zeros((len(p), dim))
            out[:, split:] = sphere_rotation(cid[1], p[:, split:])
            return out

        return fn
    raise ConfigurationError(f"unresolvable field {name!r}")


# ---------------------------------------------------------------------------
# zero components


def _pole_distance(pole: str, chart_of: Callable, offset: int, dim: int):
    """Stereographic radius from ``pole`` on the factor starting at axis ``offset``."""
    def fn(cid, points):
        q = points[:, offset : offset + 2]
        r = np.hypot(q[:, 0], q[:, 1])
        grad = np.zeros((len(points), dim))
        if chart_of(cid) == pole:
            safe = np.where(r > 0, r, 1.0)
            grad[:, offset : offset + 2] = np.where(r[:, None] > 0, q / safe[:, None], 0.0)
            return r, grad
        safe = np.where(r > 0, r, 1.0)
        d = np.where(r > 0, 1.0 / safe, np.inf)
        grad[:, offset : offset + 2] = np.where(r[:, None] > 0, -q / safe[:, None] ** 3, 0.0)
        return d, grad

    return fn


def sphere_poles(cfg: ScenarioConfig, poles=POLES) -> list[ZeroComponent]:
    return [
        ZeroComponent(
            name=f"pole_{p}",
            dimension=0,
            codimension=2,
            distance=_pole_distance(p, lambda cid: cid, 0, 2),
            tube_radius=cfg.tube_radius,
            center=(p, np.zeros(2)),
            on_component=lambda rng, k, p=p: [(p, np.zeros(2))],
            injectivity=1.0 if len(poles) == 2 else 1.5,
        )
        for p in poles
    ]


def product_pole_sets(cfg: ScenarioConfig, atlas: ProductAtlas) -> list[ZeroComponent]:
    base = atlas.first
    out = []
    for p in POLES:
        def embed(cid, pts, fiber, p=p):
            return (cid, p), np.concatenate([pts, fiber], axis=1)

        def on_component(rng, k, p=p):
            phys = base.random_physical(rng, k)
            res = []
            for q in phys:
                for cid in base.chart_ids:
                    coords, ok = base.from_physical(cid, q[None])
                    if ok[0]:
                        res.append(((cid, p), np.concatenate([coords[0], np.zeros(2)])))
                        break
            return res

        fiber = FiberStructure(
            base_atlas=base,
            embed=embed,
            fiber_axes=(2, 3),
            normal_curvature=lambda cid, pts: Form(2, {(0, 1): np.zeros((len(pts), 2, 2))}, (2, 2), (len(pts),)),
        )
        out.append(
            ZeroComponent(
                name=f"S2x{p}",
                dimension=2,
                codimension=2,
                distance=_pole_distance(p, lambda cid: cid[1], 2, 4),
                tube_radius=cfg.tube_radius,
                on_component=on_component,
                fiber=fiber,
                injectivity=1.0,
            )
        )
    return out


# ---------------------------------------------------------------------------
# builders


def make_atlas(cfg: ScenarioConfig) -> Atlas:
    if cfg.manifold == "t2":
        return TorusAtlas(2, cfg.resolution)
    if cfg.manifold == "s2":
        return SphereAtlas(cfg.resolution)
    return ProductAtlas(SphereAtlas(cfg.resolution), SphereAtlas(cfg.resolution))


def signature_connection(atlas: Atlas, n: int, steps, order: int = 4) -> tuple[GradedConnection, Any]:
    model = build_clifford_model(n)
    ops = np.einsum("iab,jbc->ijac", model.ext, model.con).astype(complex)
    bp, bm = model.basis_plus, model.basis_minus
    plus = np.einsum("xa,ijab,by->ijxy", bp.conj().T, ops, bp)
    minus = np.einsum("xa,ijab,by->ijxy", bm.conj().T, ops, bm)
    lc = LocalConnection(atlas.levi_civita, 2 * n, 2 * n, steps, order)
    return GradedConnection(InducedConnection(lc, plus, skew=True), InducedConnection(lc, minus, skew=True)), model


def line_bundle_connection(atlas: SphereAtlas, steps, order: int = 4) -> GradedConnection:
    """E+ trivial with the trivial connection; E- = O(1) with a_N = -conj(z) dz / (1 + |z|^2)."""
    def minus_form(cid, p):
        z = p[:, 0] + 1j * p[:, 1]
        coeff = -np.conj(z) / (1 + np.abs(z) ** 2)
        # dz = dx + i dy
        out = np.empty((len(p), 2, 1, 1), dtype=complex)
        out[:, 0, 0, 0] = coeff
        out[:, 1, 0, 0] = 1j * coeff
        return out

    plus = LocalConnection.trivial(1, 2)
    minus = LocalConnection(minus_form, 1, 2, steps, order)
    return GradedConnection(plus, minus)


def line_bundle_map(cid, p) -> np.ndarray:
    """v in the local frames: z on the north chart, 1 on the south chart (transition 1/z)."""
    if cid == "N":
        z = p[:, 0] + 1j * p[:, 1]
    else:
        z = np.ones(len(p), dtype=complex)
    return z[:, None, None]


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    cfg.validate()
    atlas = make_atlas(cfg)
    steps = atlas_steps(atlas)
    dim = 2 * cfg.n
    common = dict(
        name=cfg.name,
        atlas=atlas,
        n=cfg.n,
        trunc=cfg.trunc,
        steps=steps,
        order=cfg.stencil_order,
        profile_kind=cfg.profile,
        tolerances=dict(cfg.tolerances),
        chunk=cfg.chunk,
    )
    if cfg.bundle == "line_degree_one":
        return Scenario(
            connection=line_bundle_connection(atlas, steps, cfg.stencil_order),
            v_fn=line_bundle_map,
            components=sphere_poles(cfg, poles=("N",)),
            **common,
        )
    connection, model = signature_connection(atlas, cfg.n, steps, cfg.stencil_order)
    xi = _field(cfg.sections.get("xi", "zero"), atlas, dim)
    eta = _field(cfg.sections.get("eta", "zero"), atlas, dim)

    def v_fn(cid, p):
        return symbol_at_point(model, xi(cid, p), eta(cid, p))

    if cfg.manifold == "t2":
        components, mesh, chi = [], torus_triangulation(3), 0
    elif cfg.manifold == "s2":
        components = sphere_poles(cfg) if cfg.sections.get("xi") == "rotation" else []
        mesh, chi = octahedron(), 2
    else:
        components = product_pole_sets(cfg, atlas) if cfg.sections.get("xi") == "rotation_second_factor" else []
        mesh, chi = product_mesh(octahedron(), octahedron()), 4
    return Scenario(
        connection=connection,
        v_fn=v_fn,
        components=components,
        mesh=mesh,
        euler_number=chi,
        model=model,
        xi_fn=xi,
        eta_fn=eta,
        signature_bundle=True,
        **common,
    )
