"""Small scenario builders shared by the driver, CLI and acceptance tests."""

from lagwave.driver import SimulationConfig
from lagwave.grid import AcousticMedium, Constant, ElasticMedium, Layered, build_grid
from lagwave.krylov import KrylovConfig
from lagwave.laguerre import LaguerreBasis
from lagwave.operators import SourceKind, SourceSpec

C = 2000.0
F0 = 30.0
LAMBDA = C / F0


def homogeneous_acoustic(n_r=40, n_z=30, l1=600.0, l2=450.0, n=120, t_end=0.35, receivers=None,
                         amplitude=1.0, workers=1, tol=1e-8, snapshot_times=()):
    """Unit-kappa medium with rho = 1/c^2, monopole on the free surface at the axis."""
    return SimulationConfig(
        physics="acoustic",
        grid=build_grid(l1, l2, n_r, n_z),
        medium=AcousticMedium(Constant(1.0), Constant(1.0 / C**2)),
        basis=LaguerreBasis(9, 400.0, n),
        source=SourceSpec(SourceKind.MONOPOLE, 0.0, 0.0, F0, 0.2, 4.0, amplitude),
        receivers=receivers if receivers is not None else [(200.0, 0.0), (300.0, 0.0)],
        snapshot_times=snapshot_times,
        t_end=t_end,
        dt=1e-3,
        krylov=KrylovConfig(tol=tol),
        workers=workers,
    )


def layered_elastic(n_r=30, n_z=24, l1=200.0, l2=150.0, n=80, t_end=0.3, amplitude=1.0, workers=1,
                    z0=30.0, receivers=None, homogeneous=False):
    """Thin soft layer over a half-space with a centre-of-pressure source on the axis."""
    if homogeneous:
        vp, vs, rho = Constant(3000.0), Constant(1700.0), Constant(2200.0)
    else:
        tops = (0.0, 20.0)
        vp = Layered(tops, (1500.0, 3000.0))
        vs = Layered(tops, (800.0, 1700.0))
        rho = Layered(tops, (1800.0, 2200.0))
    return SimulationConfig(
        physics="elastic",
        grid=build_grid(l1, l2, n_r, n_z),
        medium=ElasticMedium.from_velocities(vp, vs, rho),
        basis=LaguerreBasis(8, 600.0, n),
        source=SourceSpec(SourceKind.CENTER_OF_PRESSURE, 0.0, z0, F0, 0.1, 4.0, amplitude),
        receivers=receivers if receivers is not None else [(60.0, 0.0), (20.0, 0.0)],
        t_end=t_end,
        dt=1e-3,
        krylov=KrylovConfig(tol=1e-8, restart_k=10),
        workers=workers,
    )


def acoustic_scenario_text(l1=600.0, l2=450.0, n_r=40, n_z=30, n=120, t_end=0.35, receivers="200 0; 300 0",
                           extra=""):
    rho = 1.0 / C**2
    return f"""\
[run]
physics = acoustic
t_end = {t_end}
dt = 1e-3

[grid]
l1 = {l1}
l2 = {l2}
n_r = {n_r}
n_z = {n_z}

[medium]
type = constant
kappa = 1.0
rho = {rho!r}

[basis]
alpha = 9
h = 400
n = {n}

[source]
kind = monopole
r0 = 0
z0 = 0

[receivers]
positions = {receivers}
{extra}"""


def ppw_cells(length, ppw, wavelength=LAMBDA):
    """Node count for a step of wavelength / ppw, with the last node on the wall."""
    return int(round(length / (wavelength / ppw) + 0.5))
