"""Run configuration: INI file with sections problem, mesh, solver, output, analysis.

Example::

    [problem]
    k = 0.0

    [mesh]
    source = generated          ; or "msh"
    n_surface = 8
    n_radial = auto             ; balanced layer count
    outer_radius = 10
    grading = auto              ; R ** (1 / n_radial)
    ; path = shell.msh          ; for source = msh
    ; inner_tag = 1
    ; outer_tag = 2

    [solver]
    tol = 1e-8
    max_iter = auto
    preconditioner = jacobi     ; or "none"

    [output]
    directory = out
    vtk = yes
    checkpoint = yes

    [analysis]
    ring_threshold = 0.08
    planes = xz:0, xy:0
    resolution = 81

The environment variable ``SATURNQ_OUTPUT_DIR`` overrides
``[output] directory``; nothing else is read from the environment.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .mesh import INNER, OUTER, TetMesh, balanced_n_radial, cubed_sphere_shell, read_msh

OUTPUT_ENV = "SATURNQ_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class MeshSpec:
    source: str = "generated"
    n_surface: int = 8
    n_radial: int | None = None
    outer_radius: float = 10.0
    grading: float | None = None
    path: Path | None = None
    inner_tag: int = 1
    outer_tag: int = 2

    def build(self) -> TetMesh:
        if self.source == "generated":
            nr = self.n_radial or balanced_n_radial(self.n_surface, self.outer_radius, self.grading)
            return cubed_sphere_shell(self.n_surface, nr, self.outer_radius, self.grading)
        if self.path is None:
            raise ConfigError("mesh source 'msh' needs a path")
        if not self.path.exists():
            raise FileNotFoundError(f"mesh file not found: {self.path}")
        return read_msh(self.path, {self.inner_tag: INNER, self.outer_tag: OUTER})


@dataclass
class SolverSpec:
    tol: float = 1e-8
    max_iter: int | None = None
    preconditioner: str = "jacobi"


@dataclass
class RunConfig:
    k: float = 0.0
    mesh: MeshSpec = field(default_factory=MeshSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output_dir: Path = Path("out")
    write_vtk: bool = True
    write_checkpoint: bool = True
    ring_threshold: float = 0.08
    planes: list[tuple[str, float]] = field(default_factory=lambda: [("xz", 0.0)])
    resolution: int = 81

    def validate(self) -> None:
        if not self.k > -1.0:
            raise ConfigError(f"k must exceed -1, got {self.k}")
        if self.mesh.source not in ("generated", "msh"):
            raise ConfigError(f"unknown mesh source {self.mesh.source!r}")
        if self.mesh.source == "generated" and self.mesh.path is not None:
            raise ConfigError("give either a generated mesh or a path, not both")
        if self.mesh.source == "msh" and self.mesh.path is None:
            raise ConfigError("mesh source 'msh' needs a path")
        if self.solver.preconditioner not in ("jacobi", "none"):
            raise ConfigError(f"unknown preconditioner {self.solver.preconditioner!r}")
        for plane, _ in self.planes:
            if plane not in ("xy", "xz", "yz"):
                raise ConfigError(f"unknown plane {plane!r}")

    def echo(self) -> dict:
        return {
            "k": self.k,
            "mesh": {"source": self.mesh.source, "n_surface": self.mesh.n_surface,
                     "n_radial": self.mesh.n_radial, "outer_radius": self.mesh.outer_radius,
                     "grading": self.mesh.grading,
                     "path": None if self.mesh.path is None else str(self.mesh.path)},
            "solver": {"tol": self.solver.tol, "max_iter": self.solver.max_iter,
                       "preconditioner": self.solver.preconditioner},
            "output_dir": str(self.output_dir),
        }


def _opt(section, key, conv, default):
    if section is None or key not in section:
        return default
    raw = section[key].strip()
    if raw.lower() in ("", "auto", "none"):
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not valid") from None


def _bool(raw: str) -> bool:
    v = raw.lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(raw)


def _planes(raw: str) -> list[tuple[str, float]]:
    out = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, off = item.partition(":")
        out.append((name.strip(), float(off) if off.strip() else 0.0))
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (or defaults only), apply ``overrides``, validate."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        cp.read(path)
    get = cp.__getitem__
    sec = {name: (get(name) if cp.has_section(name) else None)
           for name in ("problem", "mesh", "solver", "output", "analysis")}
    base = path.parent if path is not None else Path(".")

    mpath = _opt(sec["mesh"], "path", Path, None)
    if mpath is not None and not mpath.is_absolute():
        mpath = base / mpath
    mesh = MeshSpec(
        source=_opt(sec["mesh"], "source", str, "msh" if mpath is not None else "generated"),
        n_surface=_opt(sec["mesh"], "n_surface", int, 8),
        n_radial=_opt(sec["mesh"], "n_radial", int, None),
        outer_radius=_opt(sec["mesh"], "outer_radius", float, 10.0),
        grading=_opt(sec["mesh"], "grading", float, None),
        path=mpath,
        inner_tag=_opt(sec["mesh"], "inner_tag", int, 1),
        outer_tag=_opt(sec["mesh"], "outer_tag", int, 2),
    )
    solver = SolverSpec(
        tol=_opt(sec["solver"], "tol", float, 1e-8),
        max_iter=_opt(sec["solver"], "max_iter", int, None),
        preconditioner=_opt(sec["solver"], "preconditioner", str, "jacobi"),
    )
    cfg = RunConfig(
        k=_opt(sec["problem"], "k", float, 0.0),
        mesh=mesh,
        solver=solver,
        output_dir=_opt(sec["output"], "directory", Path, Path("out")),
        write_vtk=_opt(sec["output"], "vtk", _bool, True),
        write_checkpoint=_opt(sec["output"], "checkpoint", _bool, True),
        ring_threshold=_opt(sec["analysis"], "ring_threshold", float, 0.08),
        planes=_opt(sec["analysis"], "planes", _planes, [("xz", 0.0)]),
        resolution=_opt(sec["analysis"], "resolution", int, 81),
    )
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key == "mesh_path":
            cfg.mesh.path, cfg.mesh.source = Path(val), "msh"
        elif hasattr(cfg.mesh, key):
            setattr(cfg.mesh, key, val)
        else:
            setattr(cfg, key, val)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        cfg.output_dir = Path(env)
    cfg.validate()
    return cfg
